"""Greedy core-set selection by marginal coding-rate gain."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .coding_rate import CodingRateParams, candidate_gains, check_unit_columns, coding_rate
from .errors import InputError
from .records import Rubric

logger = logging.getLogger(__name__)

STOP_REASONS = ("size_cap", "early_stop", "pool_exhausted")

# Gains this close to the step maximum are treated as tied and resolved by id.
TIE_TOL = 1e-12

Pool = Union[Sequence[Rubric], Mapping[str, np.ndarray]]


@dataclass(frozen=True)
class SelectionConfig:
    max_size: Optional[int] = 64
    tau_min: float = 0.002
    patience: int = 2
    params: CodingRateParams = field(default_factory=CodingRateParams)

    def __post_init__(self):
        if not self.tau_min > 0:
            raise InputError(f"tau_min must be > 0, got {self.tau_min}")
        if self.patience < 1:
            raise InputError(f"patience must be >= 1, got {self.patience}")
        if self.max_size is not None and self.max_size < 1:
            raise InputError(f"max_size must be >= 1 or None, got {self.max_size}")


@dataclass(frozen=True)
class Pick:
    rubric_id: str
    marginal_gain: float
    coding_rate_after: float


@dataclass
class SelectionTrace:
    picks: list[Pick] = field(default_factory=list)
    stop_reason: str = "pool_exhausted"

    @property
    def gains(self) -> list[float]:
        return [p.marginal_gain for p in self.picks]

    def to_dict(self) -> dict:
        return {
            "picks": [
                {"rubric_id": p.rubric_id, "marginal_gain": p.marginal_gain, "coding_rate_after": p.coding_rate_after}
                for p in self.picks
            ],
            "stop_reason": self.stop_reason,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionTrace":
        picks = [Pick(p["rubric_id"], float(p["marginal_gain"]), float(p["coding_rate_after"])) for p in d["picks"]]
        return cls(picks, d["stop_reason"])


@dataclass
class CoreSet:
    rubric_ids: list[str]
    trace: SelectionTrace
    epsilon_used: float

    @property
    def coding_rate(self) -> float:
        return self.trace.picks[-1].coding_rate_after if self.trace.picks else 0.0

    def to_dict(self) -> dict:
        return {"rubric_ids": list(self.rubric_ids), "trace": self.trace.to_dict(), "epsilon_used": self.epsilon_used}

    @classmethod
    def from_dict(cls, d: dict) -> "CoreSet":
        return cls(list(d["rubric_ids"]), SelectionTrace.from_dict(d["trace"]), float(d["epsilon_used"]))

    @classmethod
    def empty(cls, epsilon: float) -> "CoreSet":
        return cls([], SelectionTrace([], "pool_exhausted"), epsilon)


def early_stop_check(gain_history: Sequence[float], tau_min: float, patience: int) -> bool:
    """True iff the last ``patience`` gains exist and are all strictly below ``tau_min``."""
    if len(gain_history) < patience:
        return False
    return all(g < tau_min for g in gain_history[len(gain_history) - patience:])


def _pool_matrix(pool: Pool) -> tuple[list[str], np.ndarray]:
    if isinstance(pool, Mapping):
        items = [(str(k), v) for k, v in pool.items()]
    else:
        items = []
        for r in pool:
            if r.embedding is None:
                raise InputError(f"rubric {r.id} has no embedding")
            items.append((r.id, r.embedding))
    if not items:
        raise InputError("cannot select from an empty pool")
    items.sort(key=lambda kv: kv[0])
    ids = [k for k, _ in items]
    if len(set(ids)) != len(ids):
        raise InputError("pool contains duplicate rubric ids")
    vecs = [np.asarray(v, dtype=float).ravel() for _, v in items]
    dims = {v.shape[0] for v in vecs}
    if len(dims) != 1:
        raise InputError(f"mixed embedding dimensions in pool: {sorted(dims)}")
    E = np.column_stack(vecs)
    if not np.all(np.isfinite(E)):
        raise InputError("pool embeddings contain non-finite entries")
    check_unit_columns(E)
    return ids, E


def _argmax_lowest_id(gains: np.ndarray) -> int:
    # Candidates are already in id order, so the first near-maximal index wins.
    return int(np.flatnonzero(gains >= gains.max() - TIE_TOL)[0])


def greedy_select(pool: Pool, config: SelectionConfig = SelectionConfig()) -> CoreSet:
    """Select rubrics one at a time by largest marginal coding-rate gain.

    ``pool`` is a sequence of rubrics carrying unit-norm embeddings, or a
    mapping from id to embedding. Ties are broken by the lowest id. The run
    stops at the size cap, when the last ``patience`` gains were all below
    ``tau_min`` (those sub-threshold picks stay in the core), or when the pool
    runs out.
    """
    ids, E = _pool_matrix(pool)
    params = config.params
    remaining = list(range(len(ids)))
    chosen: list[int] = []
    trace = SelectionTrace()
    rate = 0.0

    while True:
        gains = candidate_gains(E[:, chosen], E[:, remaining], params, base_rate=rate)
        k = _argmax_lowest_id(gains)
        idx = remaining.pop(k)
        chosen.append(idx)
        new_rate = coding_rate(E[:, chosen], params)
        trace.picks.append(Pick(ids[idx], float(gains[k]), new_rate))
        rate = new_rate

        if early_stop_check(trace.gains, config.tau_min, config.patience):
            trace.stop_reason = "early_stop"
            break
        if config.max_size is not None and len(chosen) >= config.max_size:
            trace.stop_reason = "size_cap"
            break
        if not remaining:
            trace.stop_reason = "pool_exhausted"
            break

    logger.debug("selected %d of %d rubrics (%s)", len(chosen), len(ids), trace.stop_reason)
    return CoreSet([p.rubric_id for p in trace.picks], trace, params.epsilon)


def update_core(
    current_core: CoreSet,
    core_rubrics: Sequence[Rubric],
    new_rubrics: Sequence[Rubric],
    config: SelectionConfig = SelectionConfig(),
) -> CoreSet:
    """Reselect from scratch over ``current core + new rubrics``.

    ``core_rubrics`` supplies the records (with embeddings) behind
    ``current_core.rubric_ids``. Previously selected rubrics may be dropped.
    """
    by_id = {r.id: r for r in core_rubrics}
    missing = [i for i in current_core.rubric_ids if i not in by_id]
    if missing:
        raise InputError(f"core rubric(s) without records: {missing}")
    union = {i: by_id[i] for i in current_core.rubric_ids}
    for r in new_rubrics:
        union.setdefault(r.id, r)
    return greedy_select(list(union.values()), config)
