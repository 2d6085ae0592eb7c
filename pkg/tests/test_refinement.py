import dataclasses
import logging

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rubriclearn.backends import scripted_mock
from rubriclearn.errors import GenerationError, InputError, JudgmentError
from rubriclearn.records import PreferencePair, Rubric
from rubriclearn.refinement import (
    JUDGE_TEMPERATURE,
    PROPOSE_TEMPERATURE,
    RefinementOutcome,
    judge,
    presentation_swap,
    propose,
    refine_batch,
    refine_pair,
    render_judge,
    render_propose,
    revise,
    to_dataset_side,
)

RUB = "<rubrics>{}</rubrics>"
A, B, TIE = "<preference>A</preference>", "<preference>B</preference>", "<preference>tie</preference>"


def test_propose_parses_block(pair):
    out = propose(pair, 5, scripted_mock(["<rubrics>Be factual\nBe concise</rubrics>"]))
    assert [r.text for r in out] == ["Be factual", "Be concise"]
    assert all(r.source_pair_id == "g1" and r.refine_iterations == 1 for r in out)


def test_propose_truncates_with_warning(pair, caplog):
    raw = RUB.format("\n".join(f"rule {i}" for i in range(7)))
    with caplog.at_level(logging.WARNING):
        out = propose(pair, 5, scripted_mock([raw]))
    assert [r.text for r in out] == [f"rule {i}" for i in range(5)]
    assert "keeping first 5" in caplog.text


def test_propose_reasks_once_then_fails(pair):
    backend = scripted_mock(["no block", "still nothing"])
    with pytest.raises(GenerationError):
        propose(pair, 5, backend)
    assert len(backend.requests) == 2
    assert [r.text for r in propose(pair, 5, scripted_mock(["oops", RUB.format("ok")]))] == ["ok"]


def test_propose_uses_generation_temperature(pair):
    backend = scripted_mock([RUB.format("x")])
    propose(pair, 5, backend)
    assert backend.requests[0].temperature == PROPOSE_TEMPERATURE


def test_revise_changes_the_set(pair):
    failed = [Rubric.from_text("Be polite")]
    backend = scripted_mock([RUB.format("Be polite\nPrefer the numerically correct answer")])
    out = revise(pair, failed, 5, backend)
    assert [r.text for r in out] != [r.text for r in failed]
    assert "Be polite" in backend.prompts[0]


def test_revise_single_and_empty(pair):
    assert len(revise(pair, [Rubric.from_text("x")], 5, scripted_mock([RUB.format("Only one rubric")]))) == 1
    with pytest.raises(InputError):
        revise(pair, [], 5, scripted_mock([]))


def test_judge_parses_and_reasks():
    backend = scripted_mock(["I think A is better", "<preference>b</preference>"])
    j = judge("q", "a", "b", ["r"], backend)
    assert j.verdict == "B"
    assert backend.requests[0].temperature == JUDGE_TEMPERATURE
    with pytest.raises(JudgmentError):
        judge("q", "a", "b", ["r"], scripted_mock(["?", "??"]))
    with pytest.raises(InputError):
        judge("q", "a", "b", [], scripted_mock([]))


def test_wrong_then_correct_validates(pair):
    backend = scripted_mock([RUB.format("Be polite"), B, RUB.format("Be factual"), A])
    out = refine_pair(pair, 10, 5, backend, swapped=False)
    assert out.status == "validated" and out.iterations_used == 2
    assert [r.text for r in out.rubrics] == ["Be factual"]
    assert [j.verdict for j in out.judgment_history] == ["B", "A"]
    assert "Be polite" in backend.prompts[2]


def test_always_wrong_hits_e_max(pair):
    backend = scripted_mock([RUB.format("r0"), B, RUB.format("r1"), B, RUB.format("r2"), B])
    out = refine_pair(pair, 3, 5, backend, swapped=False)
    assert out.status == "failed" and out.iterations_used == 3
    assert len(backend.requests) == 6


def test_correct_immediately(pair):
    out = refine_pair(pair, 10, 5, scripted_mock([RUB.format("Be factual\nBe concise"), A]), swapped=False)
    assert out.status == "validated" and out.iterations_used == 1
    assert [r.text for r in out.rubrics] == ["Be factual", "Be concise"]


def test_tie_counts_as_failure(pair):
    out = refine_pair(pair, 1, 5, scripted_mock([RUB.format("x"), TIE]), swapped=False)
    assert out.status == "failed"


def test_swapped_presentation_maps_verdicts_back(pair):
    backend = scripted_mock([RUB.format("x"), B])
    out = refine_pair(pair, 1, 5, backend, swapped=True)
    assert out.status == "validated"
    assert backend.prompts[0] == render_propose(pair, 5, swapped=True)
    assert backend.prompts[1] == render_judge(pair.query, "5", "4", out.rubrics)


def test_errors_are_recorded_not_raised(pair):
    out = refine_pair(pair, 3, 5, scripted_mock([RUB.format("x")]), swapped=False)
    assert out.status == "error" and out.error
    out = refine_pair(pair, 3, 5, scripted_mock(["no", "block"]), swapped=False)
    assert out.status == "error" and out.iterations_used == 1


def test_refine_pair_validates_arguments(pair):
    with pytest.raises(InputError):
        refine_pair(pair, 0, 5, scripted_mock([]))


def test_presentation_swap_is_seeded():
    flips = [presentation_swap(0, f"p{i}") for i in range(200)]
    assert flips == [presentation_swap(0, f"p{i}") for i in range(200)]
    assert 60 < sum(flips) < 140
    assert flips != [presentation_swap(1, f"p{i}") for i in range(200)]
    assert to_dataset_side("A", True) == "B" and to_dataset_side("Tie", True) == "Tie"


def test_refine_batch_keeps_order_under_parallelism():
    pairs = [PreferencePair(f"p{i}", f"question {i}", "GOODRESP", "BADRESP", "A") for i in range(8)]

    def judge_reply(req):
        prompt = req.prompt
        return A if prompt.index("GOODRESP") < prompt.index("BADRESP") else B

    backend = scripted_mock([("Please choose", judge_reply), ("rubric", RUB.format("Prefer good answers"))])
    serial = refine_batch(pairs, backend, parallelism=1)
    parallel = refine_batch(pairs, backend, parallelism=4)
    assert [o.pair_id for o in parallel] == [p.id for p in pairs]
    assert [o.to_dict() for o in serial] == [o.to_dict() for o in parallel]
    assert all(o.status == "validated" for o in serial)


def test_outcome_round_trip(pair):
    out = refine_pair(pair, 2, 5, scripted_mock([RUB.format("a"), B, RUB.format("b"), A]), swapped=False)
    assert RefinementOutcome.from_dict(out.to_dict()).to_dict() == out.to_dict()


@settings(max_examples=60, deadline=None)
@given(verdicts=st.lists(st.sampled_from(["A", "B", "tie"]), min_size=1, max_size=6), e_max=st.integers(1, 6), swapped=st.booleans())
def test_loop_bounds_and_quality_gate(verdicts, e_max, swapped):
    pair = PreferencePair("p", "q", "x", "y", "A")
    script = []
    for i, v in enumerate(verdicts):
        script += [RUB.format(f"rule {i}"), f"<preference>{v}</preference>"]
    out = refine_pair(pair, e_max, 5, scripted_mock(script), swapped=swapped)
    assert 1 <= out.iterations_used <= e_max
    if out.status == "validated":
        assert to_dataset_side(out.judgment_history[-1].verdict, swapped) == "A"
        assert all(to_dataset_side(j.verdict, swapped) != "A" for j in out.judgment_history[:-1])
    elif out.status == "failed":
        assert out.iterations_used == e_max
        assert all(to_dataset_side(j.verdict, swapped) != "A" for j in out.judgment_history)
    else:
        assert len(verdicts) < e_max
