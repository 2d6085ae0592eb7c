"""Query-specific rubric generation: propose, judge, revise until the judge agrees."""
from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .backends import ChatRequest
from .errors import GenerationError, InputError, JudgmentError, RubricError
from .prompts import RubricSet, format_rubrics, parse_preference, parse_rubric_lines, render
from .records import Judgment, PreferencePair, Rubric

logger = logging.getLogger(__name__)

PROPOSE_TEMPERATURE = 0.7
JUDGE_TEMPERATURE = 0.0
DEFAULT_MAX_RUBRICS = 5
DEFAULT_E_MAX = 10


def presentation_swap(seed: int, pair_id: str, salt: str = "") -> bool:
    """Seeded coin flip deciding whether response B is shown first."""
    h = hashlib.sha256(f"{seed}\x00{pair_id}\x00{salt}".encode()).digest()
    return bool(h[0] & 1)


def to_dataset_side(verdict: str, swapped: bool) -> str:
    if verdict == "Tie" or not swapped:
        return verdict
    return "B" if verdict == "A" else "A"


def _presented(pair: PreferencePair, swapped: bool) -> tuple[str, str, str]:
    """(first, second, label of the preferred one as '1'/'2')."""
    first, second = (pair.response_b, pair.response_a) if swapped else (pair.response_a, pair.response_b)
    preferred_first = (pair.preferred == "A") != swapped
    return first, second, "1" if preferred_first else "2"


def render_propose(pair: PreferencePair, max_rubrics: int, swapped: bool = False) -> str:
    first, second, pref = _presented(pair, swapped)
    return render(
        "propose",
        number=max_rubrics,
        query=pair.query,
        answer_1=first,
        answer_2=second,
        preference=pref,
        critic=pair.critique or "",
    )


def render_revise(pair: PreferencePair, failed: Sequence[Rubric], max_rubrics: int, swapped: bool = False) -> str:
    first, second, pref = _presented(pair, swapped)
    return render(
        "revise",
        number=max_rubrics,
        query=pair.query,
        answer_1=first,
        answer_2=second,
        preference=pref,
        previous_rubric_1=format_rubrics(failed),
    )


def render_judge(query: str, response_a: str, response_b: str, rubrics: RubricSet) -> str:
    return render("judge", rubrics=format_rubrics(rubrics), query=query, response_a=response_a, response_b=response_b)


def _generate(prompt: str, pair: PreferencePair, max_rubrics: int, backend, *, batch_iteration: int, refine_iteration: int) -> list[Rubric]:
    request = ChatRequest.user(prompt, temperature=PROPOSE_TEMPERATURE)
    for attempt in range(2):
        lines = parse_rubric_lines(backend.chat(request).content)
        if lines:
            break
        logger.warning("pair %s: no <rubrics> block (attempt %d)", pair.id, attempt + 1)
    else:
        raise GenerationError(f"pair {pair.id}: no usable <rubrics> block after re-ask")
    if len(lines) > max_rubrics:
        logger.warning("pair %s: %d rubrics returned, keeping first %d", pair.id, len(lines), max_rubrics)
        lines = lines[:max_rubrics]
    return [
        Rubric.from_text(
            line,
            source_pair_id=pair.id,
            batch_iteration=batch_iteration,
            refine_iterations=refine_iteration,
        )
        for line in lines
    ]


def propose(pair: PreferencePair, max_rubrics: int, backend, *, swapped: bool = False, batch_iteration: int = 0) -> list[Rubric]:
    if max_rubrics < 1:
        raise InputError("max_rubrics must be >= 1")
    prompt = render_propose(pair, max_rubrics, swapped)
    return _generate(prompt, pair, max_rubrics, backend, batch_iteration=batch_iteration, refine_iteration=1)


def revise(
    pair: PreferencePair,
    failed_rubrics: Sequence[Rubric],
    max_rubrics: int,
    backend,
    *,
    swapped: bool = False,
    batch_iteration: int = 0,
    refine_iteration: int = 2,
) -> list[Rubric]:
    if not failed_rubrics:
        raise InputError("revise() needs the failed rubric set")
    if max_rubrics < 1:
        raise InputError("max_rubrics must be >= 1")
    prompt = render_revise(pair, failed_rubrics, max_rubrics, swapped)
    return _generate(prompt, pair, max_rubrics, backend, batch_iteration=batch_iteration, refine_iteration=refine_iteration)


def judge(query: str, response_a: str, response_b: str, rubrics: RubricSet, backend) -> Judgment:
    """Ask the judge which of two responses is better under ``rubrics``.

    The verdict refers to the order the responses were passed in. One
    re-ask is made when the reply has no parseable tag.
    """
    if isinstance(rubrics, Sequence) and not rubrics:
        raise InputError("judge() needs a non-empty rubric set")
    request = ChatRequest.user(render_judge(query, response_a, response_b, rubrics), temperature=JUDGE_TEMPERATURE)
    raw = ""
    for _ in range(2):
        raw = backend.chat(request).content
        verdict = parse_preference(raw)
        if verdict is not None:
            return Judgment(verdict, raw)
    raise JudgmentError(f"no <preference> verdict in judge output: {raw[:120]!r}")


@dataclass
class RefinementOutcome:
    pair_id: str
    status: str  # validated | failed | error
    rubrics: list[Rubric]
    iterations_used: int
    judgment_history: list[Judgment] = field(default_factory=list)
    swapped: bool = False
    error: Optional[str] = None

    @property
    def validated(self) -> bool:
        return self.status == "validated"

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "status": self.status,
            "rubrics": [r.to_dict(with_embedding=False) for r in self.rubrics],
            "iterations_used": self.iterations_used,
            "judgment_history": [{"verdict": j.verdict, "raw_response": j.raw_response} for j in self.judgment_history],
            "swapped": self.swapped,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RefinementOutcome":
        return cls(
            d["pair_id"],
            d["status"],
            [Rubric.from_dict(r) for r in d["rubrics"]],
            d["iterations_used"],
            [Judgment(j["verdict"], j["raw_response"]) for j in d["judgment_history"]],
            d.get("swapped", False),
            d.get("error"),
        )


def refine_pair(
    pair: PreferencePair,
    e_max: int = DEFAULT_E_MAX,
    max_rubrics: int = DEFAULT_MAX_RUBRICS,
    backend=None,
    *,
    swapped: Optional[bool] = None,
    seed: int = 0,
    batch_iteration: int = 0,
) -> RefinementOutcome:
    """Run the propose/judge/revise loop for one pair.

    Iteration 1 proposes, later iterations revise the last failed set; each
    is followed by one judgment. A Tie counts as a miss. Backend or parse
    errors end the pair with ``status="error"`` instead of propagating.
    """
    if e_max < 1:
        raise InputError("e_max must be >= 1")
    if backend is None:
        raise InputError("refine_pair() needs a chat backend")
    if swapped is None:
        swapped = presentation_swap(seed, pair.id)
    first, second, _ = _presented(pair, swapped)
    history: list[Judgment] = []
    rubrics: list[Rubric] = []
    iteration = 0
    try:
        for iteration in range(1, e_max + 1):
            if iteration == 1:
                rubrics = propose(pair, max_rubrics, backend, swapped=swapped, batch_iteration=batch_iteration)
            else:
                rubrics = revise(
                    pair, rubrics, max_rubrics, backend,
                    swapped=swapped, batch_iteration=batch_iteration, refine_iteration=iteration,
                )
            j = judge(pair.query, first, second, rubrics, backend)
            history.append(j)
            if to_dataset_side(j.verdict, swapped) == pair.preferred:
                return RefinementOutcome(pair.id, "validated", rubrics, iteration, history, swapped)
    except RubricError as exc:
        logger.warning("pair %s aborted at iteration %d: %s", pair.id, iteration, exc)
        return RefinementOutcome(pair.id, "error", rubrics, max(iteration, 1), history, swapped, str(exc))
    return RefinementOutcome(pair.id, "failed", rubrics, e_max, history, swapped)


def refine_batch(
    pairs: Sequence[PreferencePair],
    backend,
    *,
    e_max: int = DEFAULT_E_MAX,
    max_rubrics: int = DEFAULT_MAX_RUBRICS,
    seed: int = 0,
    batch_iteration: int = 0,
    parallelism: int = 1,
) -> list[RefinementOutcome]:
    """Refine pairs independently; results come back in input order."""
    def run(p: PreferencePair) -> RefinementOutcome:
        return refine_pair(p, e_max, max_rubrics, backend, seed=seed, batch_iteration=batch_iteration)

    if parallelism <= 1 or len(pairs) <= 1:
        return [run(p) for p in pairs]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(run, pairs))
