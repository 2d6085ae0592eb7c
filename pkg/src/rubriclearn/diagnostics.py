"""Per-rubric utility diagnostics and voted rubric-set accuracy.

Coverage is the share of test pairs on which a rubric, used alone, yields a
non-tie verdict. Precision is the share of those verdicts that match the
label. Contribution is the accuracy lost when the rubric is removed from the
full set. Judgment failures are logged and counted as ties.
"""
from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .errors import InputError, RubricError
from .prompts import RubricSet
from .records import PreferencePair, Rubric, ThemeTipsRubric, rubric_id
from .refinement import judge, presentation_swap, to_dataset_side

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VotingConfig:
    n_votes: int = 1
    seed: int = 0
    shuffle: bool = True  # seeded per-vote presentation-order flips

    def __post_init__(self):
        if self.n_votes < 1:
            raise InputError(f"n_votes must be >= 1, got {self.n_votes}")


@dataclass
class RubricDiagnostics:
    rubric_id: str
    label: str
    coverage: float
    precision: Optional[float]
    contribution: Optional[float]
    n_pairs: int = 0
    n_non_tie: int = 0
    n_correct: int = 0
    n_judgments: int = 0

    @property
    def theme_excerpt(self) -> str:
        return _excerpt(self.label)

    def to_dict(self) -> dict:
        return {
            "rubric_id": self.rubric_id,
            "theme_excerpt": self.theme_excerpt,
            "coverage": self.coverage,
            "precision": self.precision,
            "contribution": self.contribution,
        }


def _excerpt(text: str, width: int = 48) -> str:
    text = " ".join(text.split())
    return text if len(text) <= width else text[: width - 3].rstrip() + "..."


def _check_test(test: Sequence[PreferencePair]) -> None:
    if not test:
        raise InputError("test set is empty")
    ids = [p.id for p in test]
    if len(set(ids)) != len(ids):
        raise InputError("test set ids are not unique")


def _check_rubrics(rubrics: RubricSet) -> None:
    n = len(rubrics.themes) if isinstance(rubrics, ThemeTipsRubric) else len(rubrics)
    if n == 0:
        raise InputError("rubric set is empty")


def _vote(rubrics: RubricSet, pair: PreferencePair, k: int, voting: VotingConfig, backend) -> str:
    swapped = presentation_swap(voting.seed, pair.id, f"vote{k}") if voting.shuffle else False
    first, second = (pair.response_b, pair.response_a) if swapped else (pair.response_a, pair.response_b)
    try:
        verdict = judge(pair.query, first, second, rubrics, backend).verdict
    except RubricError as exc:
        logger.warning("pair %s vote %d: judgment failed (%s); counted as Tie", pair.id, k, exc)
        return "Tie"
    return to_dataset_side(verdict, swapped)


def majority(verdicts: Sequence[str]) -> Optional[str]:
    """Most frequent verdict, or None when the top count is shared."""
    counts = Counter(verdicts).most_common()
    if not counts:
        return None
    if len(counts) > 1 and counts[0][1] == counts[1][1]:
        return None
    return counts[0][0]


def _pair_verdicts(rubrics: RubricSet, test: Sequence[PreferencePair], voting: VotingConfig, backend, parallelism: int) -> list[list[str]]:
    def run(pair: PreferencePair) -> list[str]:
        return [_vote(rubrics, pair, k, voting, backend) for k in range(voting.n_votes)]

    if parallelism <= 1:
        return [run(p) for p in test]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(run, test))


@dataclass
class UtilityCounts:
    n_pairs: int
    n_non_tie: int
    n_correct: int
    n_judgments: int

    @property
    def coverage(self) -> float:
        return self.n_non_tie / self.n_pairs

    @property
    def precision(self) -> Optional[float]:
        return self.n_correct / self.n_non_tie if self.n_non_tie else None


def utility_counts(
    rubrics: RubricSet,
    test: Sequence[PreferencePair],
    backend,
    voting: VotingConfig = VotingConfig(),
    parallelism: int = 1,
) -> UtilityCounts:
    """Non-tie and correct tallies for one rubric set, one majority verdict per pair.

    A split vote counts as a tie.
    """
    _check_test(test)
    _check_rubrics(rubrics)
    votes = _pair_verdicts(rubrics, test, voting, backend, parallelism)
    non_tie = correct = 0
    for pair, vs in zip(test, votes):
        m = majority(vs)
        if m is None or m == "Tie":
            continue
        non_tie += 1
        correct += m == pair.preferred
    return UtilityCounts(len(test), non_tie, correct, sum(len(v) for v in votes))


def _as_set(rubric: Union[Rubric, str, ThemeTipsRubric]) -> RubricSet:
    return rubric if isinstance(rubric, ThemeTipsRubric) else [rubric]


def coverage(rubric, test: Sequence[PreferencePair], backend, voting: VotingConfig = VotingConfig()) -> float:
    return utility_counts(_as_set(rubric), test, backend, voting).coverage


def precision(rubric, test: Sequence[PreferencePair], backend, voting: VotingConfig = VotingConfig()) -> Optional[float]:
    """Share of non-tie verdicts that are correct; None when every verdict is a tie."""
    return utility_counts(_as_set(rubric), test, backend, voting).precision


def set_accuracy(
    rubrics: RubricSet,
    test: Sequence[PreferencePair],
    voting: VotingConfig,
    backend,
    parallelism: int = 1,
) -> float:
    """Fraction of pairs whose majority verdict is the preferred side.

    Ties, and votes without a strict majority, score zero.
    """
    counts = utility_counts(rubrics, test, backend, voting, parallelism)
    return counts.n_correct / counts.n_pairs


@dataclass
class _Unit:
    id: str
    label: str
    alone: RubricSet
    rest: RubricSet


def _units(rubrics: RubricSet) -> list[_Unit]:
    if isinstance(rubrics, ThemeTipsRubric):
        return [
            _Unit(f"theme-{i + 1}", t.theme, ThemeTipsRubric([t]), rubrics.without(i))
            for i, t in enumerate(rubrics.themes)
        ]
    units = []
    for i, r in enumerate(rubrics):
        rid, text = (r.id, r.text) if isinstance(r, Rubric) else (rubric_id(str(r)), str(r))
        units.append(_Unit(rid, text, [r], list(rubrics[:i]) + list(rubrics[i + 1:])))
    return units


def contribution(
    rubric_id: str,
    full_set: RubricSet,
    test: Sequence[PreferencePair],
    voting: VotingConfig,
    backend,
) -> float:
    """Accuracy of the full set minus accuracy without ``rubric_id`` (same seeds)."""
    units = _units(full_set)
    if len(units) < 2:
        raise InputError("contribution needs a rubric set with at least two entries")
    unit = next((u for u in units if u.id == rubric_id), None)
    if unit is None:
        raise InputError(f"rubric {rubric_id!r} is not in the set")
    full = utility_counts(full_set, test, backend, voting)
    rest = utility_counts(unit.rest, test, backend, voting)
    return (full.n_correct - rest.n_correct) / len(test)


@dataclass
class DiagnosticsReport:
    rows: list[RubricDiagnostics]
    full_accuracy: float
    n_test: int
    n_votes: int

    def table(self) -> str:
        headers = ("Rubric Theme", "Coverage (%)", "Precision (%)", "Contribution (Δ Acc %)")
        body = [
            (
                r.theme_excerpt,
                f"{100 * r.coverage:.2f}",
                "n/a" if r.precision is None else f"{100 * r.precision:.2f}",
                "n/a" if r.contribution is None else f"{100 * r.contribution:.2f}",
            )
            for r in self.rows
        ]
        widths = [max(len(h), *(len(row[i]) for row in body)) if body else len(h) for i, h in enumerate(headers)]

        def fmt(cells):
            first = cells[0].ljust(widths[0])
            rest = [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
            return "  ".join([first, *rest]).rstrip()

        rule = "  ".join("-" * w for w in widths)
        lines = [fmt(headers), rule, *(fmt(row) for row in body), rule]
        lines.append(f"Full-set accuracy: {100 * self.full_accuracy:.2f}% on {self.n_test} pairs (voting@{self.n_votes})")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "full_accuracy": self.full_accuracy,
            "n_test": self.n_test,
            "n_votes": self.n_votes,
            "rubrics": [r.to_dict() for r in self.rows],
        }


def diagnose_all(
    rubrics: RubricSet,
    test: Sequence[PreferencePair],
    voting: VotingConfig,
    backend,
    parallelism: int = 1,
) -> DiagnosticsReport:
    """Coverage, precision and contribution for every rubric (or theme) in the set.

    Contribution is left as None for a single-rubric set.
    """
    _check_test(test)
    _check_rubrics(rubrics)
    units = _units(rubrics)
    full = utility_counts(rubrics, test, backend, voting, parallelism)
    rows = []
    for u in units:
        c = utility_counts(u.alone, test, backend, voting, parallelism)
        contrib = None
        if len(units) > 1:
            rest = utility_counts(u.rest, test, backend, voting, parallelism)
            contrib = (full.n_correct - rest.n_correct) / len(test)
        rows.append(
            RubricDiagnostics(u.id, u.label, c.coverage, c.precision, contrib, c.n_pairs, c.n_non_tie, c.n_correct, c.n_judgments)
        )
    return DiagnosticsReport(rows, full.n_correct / len(test), len(test), voting.n_votes)
