"""Batch-iterative rubric extraction.

Each batch iteration samples pairs without replacement, refines them,
embeds the rubrics that passed verification, reselects the core set from
``core + new`` and records the change in coding rate. The loop ends when
that change stays below ``tau_min`` for ``patience`` iterations, the data
runs out, or the iteration cap is hit. The final core is then organised
into Theme-Tips form by the chat model.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .backends import ChatRequest, Message
from .coding_rate import CodingRateParams, normalize_vector
from .errors import CheckpointError, InputError, StructuringError
from .prompts import load_template, parse_theme_tips
from .records import MAX_TIPS, PreferencePair, Rubric, ThemeTipsRubric
from .refinement import DEFAULT_E_MAX, DEFAULT_MAX_RUBRICS, RefinementOutcome, refine_batch
from .selection import CoreSet, SelectionConfig, early_stop_check, update_core

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
STRUCTURE_TEMPERATURE = 0.0
PIPELINE_STOP_REASONS = ("early_stop", "dataset_exhausted", "max_iterations")


@dataclass(frozen=True)
class PipelineConfig:
    batch_size: int = 10
    e_max: int = DEFAULT_E_MAX
    max_rubrics_per_pair: int = DEFAULT_MAX_RUBRICS
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    theme_count: int = 5
    seed: int = 0
    max_batch_iterations: int = 100
    parallelism: int = 1

    def __post_init__(self):
        for name in ("batch_size", "e_max", "max_rubrics_per_pair", "theme_count", "max_batch_iterations", "parallelism"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be >= 1, got {getattr(self, name)}")


@dataclass
class ExtractionState:
    """Everything needed to continue a run after the last finished batch."""

    seed: int
    batch_size: int
    order: list[str]
    cursor: int = 0
    iteration: int = 0
    pool: dict[str, Rubric] = field(default_factory=dict)
    core: Optional[CoreSet] = None
    batch_gain_history: list[float] = field(default_factory=list)
    processed_ids: list[str] = field(default_factory=list)
    outcomes: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "checkpoint",
            "seed": self.seed,
            "batch_size": self.batch_size,
            "order": self.order,
            "cursor": self.cursor,
            "iteration": self.iteration,
            "pool": [r.to_dict() for r in self.pool.values()],
            "core": None if self.core is None else self.core.to_dict(),
            "batch_gain_history": self.batch_gain_history,
            "processed_ids": self.processed_ids,
            "outcomes": self.outcomes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExtractionState":
        if d.get("kind") != "checkpoint":
            raise CheckpointError("not a checkpoint document")
        if d.get("schema_version") != SCHEMA_VERSION:
            raise CheckpointError(
                f"checkpoint schema_version {d.get('schema_version')!r} is not supported (expected {SCHEMA_VERSION})"
            )
        try:
            pool = [Rubric.from_dict(r) for r in d["pool"]]
            return cls(
                seed=int(d["seed"]),
                batch_size=int(d["batch_size"]),
                order=list(d["order"]),
                cursor=int(d["cursor"]),
                iteration=int(d["iteration"]),
                pool={r.id: r for r in pool},
                core=None if d["core"] is None else CoreSet.from_dict(d["core"]),
                batch_gain_history=[float(g) for g in d["batch_gain_history"]],
                processed_ids=list(d["processed_ids"]),
                outcomes=list(d["outcomes"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"malformed checkpoint: {exc}") from exc


def save_checkpoint(state: ExtractionState, path: Union[str, Path]) -> None:
    from .io import atomic_write_text

    atomic_write_text(path, json.dumps(state.to_dict(), indent=1))


def load_checkpoint(path: Union[str, Path]) -> ExtractionState:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise CheckpointError("checkpoint must be a JSON object")
    return ExtractionState.from_dict(data)


@dataclass
class ExtractionResult:
    core: CoreSet
    structured: ThemeTipsRubric
    pool_size: int
    pairs_processed: int
    batch_gain_history: list[float]
    stop_reason: str
    pool: list[Rubric] = field(default_factory=list)
    outcomes: list[dict] = field(default_factory=list)

    @property
    def batch_iterations(self) -> int:
        return len(self.batch_gain_history)

    @property
    def core_rubrics(self) -> list[Rubric]:
        by_id = {r.id: r for r in self.pool}
        return [by_id[i] for i in self.core.rubric_ids]


# -- structuring -----------------------------------------------------------------


def render_structure(core_rubrics: Sequence[Rubric], queries: Optional[Mapping[str, str]] = None) -> str:
    """Structuring template followed by one example per core rubric."""
    queries = queries or {}
    parts = [load_template("structure"), "", "## Examples"]
    for i, r in enumerate(core_rubrics, 1):
        q = queries.get(r.source_pair_id, "")
        parts.append(f"<example_{i}>\n<query>\n{q}\n</query>\n<suggestion>\n{r.text}\n</suggestion>\n</example_{i}>")
    return "\n".join(parts)


def _structure_problem(parsed: Optional[ThemeTipsRubric], theme_count: int) -> Optional[str]:
    if parsed is None:
        return "the answer has no <rubrics> block with 'Theme:' lines"
    try:
        parsed.validate(theme_count)
    except InputError as exc:
        return str(exc)
    return None


def structure_core(
    core: CoreSet,
    pool: Union[Sequence[Rubric], Mapping[str, Rubric]],
    theme_count: int,
    chat_backend,
    queries: Optional[Mapping[str, str]] = None,
) -> ThemeTipsRubric:
    """Ask the chat model to organise the core rubrics into at most ``theme_count`` themes.

    One corrective follow-up is sent when the answer breaks the format or
    the theme/tip limits; a second violation raises StructuringError.
    """
    if not core.rubric_ids:
        raise InputError("cannot structure an empty core set")
    by_id = pool if isinstance(pool, Mapping) else {r.id: r for r in pool}
    rubrics = [by_id[i] for i in core.rubric_ids]
    prompt = render_structure(rubrics, queries)
    request = ChatRequest.user(prompt, temperature=STRUCTURE_TEMPERATURE)
    reply = chat_backend.chat(request).content
    parsed = parse_theme_tips(reply)
    problem = _structure_problem(parsed, theme_count)
    if problem is None:
        return parsed
    logger.warning("structuring output rejected (%s); re-asking", problem)
    correction = (
        f"Your answer could not be accepted: {problem}. Reply again inside <rubrics></rubrics> with at most "
        f"{theme_count} 'Theme:' entries, each followed by at most {MAX_TIPS} '-Tip n:' lines."
    )
    request = ChatRequest(
        (Message("user", prompt), Message("assistant", reply), Message("user", correction)),
        STRUCTURE_TEMPERATURE,
    )
    parsed = parse_theme_tips(chat_backend.chat(request).content)
    problem = _structure_problem(parsed, theme_count)
    if problem is not None:
        raise StructuringError(f"structuring failed after re-ask: {problem}")
    return parsed


# -- main loop -------------------------------------------------------------------


def sampling_order(pair_ids: Sequence[str], seed: int) -> list[str]:
    rng = np.random.default_rng(seed)
    return [pair_ids[i] for i in rng.permutation(len(pair_ids))]


def _embed_rubrics(rubrics: list[Rubric], embed_backend) -> None:
    if not rubrics:
        return
    vecs = np.asarray(embed_backend.embed([r.text for r in rubrics]), dtype=float)
    if vecs.shape[0] != len(rubrics):
        raise InputError(f"embedder returned {vecs.shape[0]} vectors for {len(rubrics)} texts")
    for r, v in zip(rubrics, vecs):
        r.embedding = normalize_vector(v)


def _pipeline_stop(state: ExtractionState, config: PipelineConfig) -> Optional[str]:
    sel = config.selection
    if early_stop_check(state.batch_gain_history, sel.tau_min, sel.patience):
        return "early_stop"
    if state.cursor >= len(state.order):
        return "dataset_exhausted"
    if state.iteration >= config.max_batch_iterations:
        return "max_iterations"
    return None


def run_extraction(
    dataset: Sequence[PreferencePair],
    config: PipelineConfig,
    chat_backend,
    embed_backend,
    checkpoint_path: Optional[Union[str, Path]] = None,
    resume: bool = False,
) -> ExtractionResult:
    """Run batch iterations until a stop rule fires, then structure the core.

    With ``checkpoint_path`` the state is written after every iteration;
    ``resume=True`` continues from an existing checkpoint there.
    """
    if not dataset:
        raise InputError("dataset is empty")
    pairs = {p.id: p for p in dataset}
    if len(pairs) != len(dataset):
        raise InputError("dataset contains duplicate pair ids")
    eps = config.selection.params.epsilon

    if resume:
        if checkpoint_path is None or not Path(checkpoint_path).exists():
            raise CheckpointError(f"no checkpoint to resume at {checkpoint_path}")
        state = load_checkpoint(checkpoint_path)
        if state.seed != config.seed or state.batch_size != config.batch_size:
            raise CheckpointError("checkpoint seed/batch_size differ from the current configuration")
        if set(state.order) != set(pairs):
            raise CheckpointError("checkpoint was written for a different dataset")
        logger.info("resuming at iteration %d (%d pairs processed)", state.iteration, state.cursor)
    else:
        state = ExtractionState(config.seed, config.batch_size, sampling_order([p.id for p in dataset], config.seed))
    if state.core is None:
        state.core = CoreSet.empty(eps)

    while (stop := _pipeline_stop(state, config)) is None:
        batch_ids = state.order[state.cursor:state.cursor + config.batch_size]
        iteration = state.iteration + 1
        outcomes = refine_batch(
            [pairs[i] for i in batch_ids],
            chat_backend,
            e_max=config.e_max,
            max_rubrics=config.max_rubrics_per_pair,
            seed=config.seed,
            batch_iteration=iteration,
            parallelism=config.parallelism,
        )
        new: list[Rubric] = []
        seen = set(state.pool)
        for o in outcomes:
            if not o.validated:
                continue
            for r in o.rubrics:
                if r.id not in seen:
                    seen.add(r.id)
                    new.append(r)
        _embed_rubrics(new, embed_backend)

        prev_rate = state.core.coding_rate
        if new:
            state.core = update_core(state.core, list(state.pool.values()), new, config.selection)
        gain = state.core.coding_rate - prev_rate
        for r in new:
            state.pool[r.id] = r

        state.cursor += len(batch_ids)
        state.iteration = iteration
        state.processed_ids.extend(batch_ids)
        state.batch_gain_history.append(gain)
        state.outcomes.extend(_outcome_summary(o) for o in outcomes)
        n_ok = sum(o.validated for o in outcomes)
        logger.info(
            "batch %d: %d/%d validated, %d new rubrics, core=%d, gain=%.6f",
            iteration, n_ok, len(outcomes), len(new), len(state.core.rubric_ids), gain,
        )
        if checkpoint_path is not None:
            save_checkpoint(state, checkpoint_path)

    if not state.core.rubric_ids:
        raise InputError("no rubric passed verification; nothing to structure")
    queries = {p.id: p.query for p in dataset}
    structured = structure_core(state.core, state.pool, config.theme_count, chat_backend, queries)
    return ExtractionResult(
        core=state.core,
        structured=structured,
        pool_size=len(state.pool),
        pairs_processed=len(state.processed_ids),
        batch_gain_history=list(state.batch_gain_history),
        stop_reason=stop,
        pool=list(state.pool.values()),
        outcomes=list(state.outcomes),
    )


def _outcome_summary(o: RefinementOutcome) -> dict:
    return {
        "pair_id": o.pair_id,
        "status": o.status,
        "iterations_used": o.iterations_used,
        "rubric_ids": [r.id for r in o.rubrics],
        "swapped": o.swapped,
        "error": o.error,
    }


def default_config() -> PipelineConfig:
    return PipelineConfig(selection=SelectionConfig(max_size=64, tau_min=0.002, patience=2, params=CodingRateParams()))


def config_to_dict(config: PipelineConfig) -> dict:
    return asdict(config)
