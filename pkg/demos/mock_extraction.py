"""
End-to-end extraction with in-process mocks
===========================================

The synthetic chat mock plays proposer, judge, reviser and structurer; the
keyword embedder maps each topic to its own axis. Per-batch gains fall off
as the topics get covered and the run stops on its own.
"""

import logging
import tempfile
from pathlib import Path

from rubriclearn import PipelineConfig, run_extraction
from rubriclearn.backends import KeywordEmbedder
from rubriclearn.io import save_core, save_pool, trace_csv
from rubriclearn.synthetic import DEFAULT_TOPICS, SyntheticChat, make_dataset

logging.basicConfig(level=logging.INFO, format="%(message)s")

dataset = make_dataset(60, seed=0)
print(dataset[0])

# Small batches make the saturation curve visible over several iterations.
config = PipelineConfig(batch_size=2, seed=0)
result = run_extraction(dataset, config, SyntheticChat(generic_first=True), KeywordEmbedder(DEFAULT_TOPICS))

print("stop reason:", result.stop_reason)
print("pairs processed:", result.pairs_processed, "of", len(dataset))
for i, g in enumerate(result.batch_gain_history, 1):
    print(f"batch {i}: gain {g:.4f} " + "#" * int(40 * max(g, 0)))

# %%
# Core set and its Theme-Tips structure
print(trace_csv(result.core))
for theme in result.structured.themes:
    print("Theme:", theme.theme)
    for j, tip in enumerate(theme.tips, 1):
        print(f"  -Tip {j}: {tip}")

# %%
# Every pair needed one revision: the first proposal was topic-free, the
# judge tied, and the revised rubric named the topic.
print({o["iterations_used"] for o in result.outcomes})

out = Path(tempfile.mkdtemp())
save_pool(result.pool, out / "pool.jsonl")
save_core(result.core, out / "core.json", result.pool, result.batch_gain_history)
print("artifacts in", out)
