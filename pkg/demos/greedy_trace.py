"""
Greedy core-set selection on clustered embeddings
=================================================

Twenty rubric embeddings fall into four tight clusters. Greedy selection by
marginal coding-rate gain picks one representative per cluster before it
starts spending picks on near-duplicates, and the gains collapse once every
cluster is covered.
"""

import numpy as np

from rubriclearn import SelectionConfig, greedy_select

rng = np.random.default_rng(3)
d = 24
centers = np.linalg.qr(rng.standard_normal((d, 4)))[0]

pool = {}
for k in range(4):
    for j in range(5):
        v = centers[:, k] + 0.08 * rng.standard_normal(d)
        pool[f"cluster{k}-{j}"] = v / np.linalg.norm(v)

core = greedy_select(pool, SelectionConfig(max_size=None, tau_min=0.002, patience=2))

print(f"{'step':>4}  {'rubric':<12} {'gain':>10} {'C after':>10}")
for i, pick in enumerate(core.trace.picks, 1):
    print(f"{i:>4}  {pick.rubric_id:<12} {pick.marginal_gain:>10.5f} {pick.coding_rate_after:>10.5f}")
print("stop reason:", core.trace.stop_reason)

# %%
# A hard size cap ends the run earlier, whatever the gains are.
capped = greedy_select(pool, SelectionConfig(max_size=4))
print("capped core:", capped.rubric_ids, capped.trace.stop_reason)
