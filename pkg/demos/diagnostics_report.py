"""
Coverage, precision and contribution of a Theme-Tips rubric
===========================================================

Each theme is judged alone over a test set to get coverage (share of
non-tie verdicts) and precision (share of those that are right). Its
contribution is the accuracy the full set loses without it.
"""

from rubriclearn import Theme, ThemeTipsRubric, VotingConfig, diagnose_all
from rubriclearn.synthetic import SyntheticChat, make_dataset

# Three of the four synthetic topics get a theme; a fourth theme is generic
# and never separates the responses.
rubric = ThemeTipsRubric(
    [
        Theme("Reward accuracy in every answer", ["Check claims for accuracy"]),
        Theme("Reward formatting that suits the request", []),
        Theme("Reward clarity of explanation", ["Prefer clarity over length"]),
        Theme("Be polite", []),
    ]
)

test = make_dataset(40, seed=11)
report = diagnose_all(rubric, test, VotingConfig(n_votes=3, seed=0), SyntheticChat())
print(report.table())

# %%
# The depth pairs are never decided, so full-set accuracy stays near 75%.
# The polite theme has zero coverage and no defined precision.
for row in report.rows:
    print(row.rubric_id, row.n_non_tie, "/", row.n_pairs, "decided")
