import dataclasses

import pytest

from conftest import FIXTURES, golden
from rubriclearn.errors import InputError
from rubriclearn.pipeline import render_structure
from rubriclearn.prompts import (
    extract_rubrics_block,
    format_rubrics,
    parse_preference,
    parse_rubric_lines,
    parse_theme_tips,
    render,
    template_placeholders,
)
from rubriclearn.records import Rubric, Theme, ThemeTipsRubric
from rubriclearn.refinement import render_judge, render_propose, render_revise


def test_template_placeholders():
    assert template_placeholders("propose") == ["number", "query", "answer_1", "answer_2", "preference", "critic"]
    assert template_placeholders("judge") == ["rubrics", "query", "response_a", "response_b"]
    assert template_placeholders("revise") == ["number", "query", "answer_1", "answer_2", "preference", "previous_rubric_1"]
    assert template_placeholders("structure") == []


def test_propose_golden(pair):
    assert render_propose(pair, 5) == golden("propose_with_critic.txt")


def test_propose_swapped_without_critic_golden(pair):
    no_critic = dataclasses.replace(pair, critique=None)
    assert render_propose(no_critic, 3, swapped=True) == golden("propose_swapped_no_critic.txt")


def test_judge_flat_golden():
    out = render_judge("What is 2+2?", "4", "5", [Rubric.from_text("Be factual"), "Be concise"])
    assert out == golden("judge_flat.txt")


def test_judge_theme_tips_golden():
    tt = ThemeTipsRubric([Theme("Prioritize clarity.", ["Use lists.", "Be brief."]), Theme("Ensure factual accuracy.", ["Check dates."])])
    assert render_judge("What is 2+2?", "4", "5", tt) == golden("judge_theme_tips.txt")


def test_revise_golden(pair):
    failed = [Rubric.from_text("Be polite"), Rubric.from_text("Be concise")]
    assert render_revise(pair, failed, 5) == golden("revise.txt")


def test_structure_golden():
    core = [
        Rubric.from_text("Be factual", source_pair_id="q1"),
        Rubric.from_text("Respect the requested form", source_pair_id="q2"),
    ]
    out = render_structure(core, {"q1": "What is 2+2?", "q2": "Write a haiku."})
    assert out == golden("structure_two_examples.txt")


def test_render_rejects_missing_or_extra_values():
    with pytest.raises(InputError):
        render("judge", rubrics="x", query="q", response_a="a")
    with pytest.raises(InputError):
        render("judge", rubrics="x", query="q", response_a="a", response_b="b", extra="?")


def test_substituted_text_is_not_re_expanded():
    out = render("judge", rubrics="{query}", query="Q", response_a="a", response_b="b")
    assert "{query}" in out


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("<rubrics>Be factual\nBe concise</rubrics>", ["Be factual", "Be concise"]),
        ("<rubrics>Only one rubric</rubrics>", ["Only one rubric"]),
        ("<rubrics>\n- Be factual\n* Be concise\n</rubrics>", ["Be factual", "Be concise"]),
        ("<rubrics>\n1. Be factual\n2) Be concise\n(3) Cite sources\n</rubrics>", ["Be factual", "Be concise", "Cite sources"]),
        ("<RUBRICS>Upper case tags</RUBRICS>", ["Upper case tags"]),
        ("<rubrics>old</rubrics> then <rubrics>new</rubrics>", ["new"]),
        ("<think><rubrics>hidden</rubrics></think><rubrics>shown</rubrics>", ["shown"]),
        ("<rubrics>1.5x speed is fine\nsame\nsame</rubrics>", ["1.5x speed is fine", "same"]),
        ("<rubrics>\n\n</rubrics>", []),
        ("no tags at all", []),
    ],
)
def test_parse_rubric_lines(raw, expected):
    assert parse_rubric_lines(raw) == expected


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("reasoning...<preference>A</preference>", "A"),
        ("<preference>tie</preference>", "Tie"),
        ("<preference>B</preference> and later <preference>A</preference>", "A"),
        ("<Preference> b </Preference>", "B"),
        ("<think><preference>A</preference></think><preference>B</preference>", "B"),
        ("<preference>maybe</preference>", None),
        ("", None),
    ],
)
def test_parse_preference(raw, expected):
    assert parse_preference(raw) == expected


def test_extract_block_none_without_tags():
    assert extract_rubrics_block("plain") is None


def test_parse_theme_tips_from_fixture():
    tt = parse_theme_tips((FIXTURES / "theme3_structuring_output.txt").read_text())
    assert len(tt.themes) == 1
    assert tt.themes[0].theme.startswith("Prioritize clarity, conciseness")
    assert len(tt.themes[0].tips) == 4
    assert tt.themes[0].tips[0].startswith('For a "Thank you" prompt')
    tt.validate(5)


def test_parse_theme_tips_variants():
    raw = (
        "<rubrics>\n**Theme:** Be accurate\n- **Tip 1:** Check facts\n  across sources\n"
        "Theme 2: Be clear\n</rubrics>"
    )
    tt = parse_theme_tips(raw)
    assert [t.theme for t in tt.themes] == ["Be accurate", "Be clear"]
    assert tt.themes[0].tips == ["Check facts across sources"]
    assert tt.themes[1].tips == []


def test_parse_theme_tips_rejects_orphan_tip_and_missing_block():
    assert parse_theme_tips("<rubrics>-Tip 1: orphan</rubrics>") is None
    assert parse_theme_tips("Theme: no block") is None
    assert parse_theme_tips("<rubrics></rubrics>") is None


def test_theme_tips_render_round_trip():
    tt = ThemeTipsRubric([Theme("A theme", ["t1", "t2"]), Theme("Other", [])])
    again = parse_theme_tips(f"<rubrics>\n{tt.render()}\n</rubrics>")
    assert again == tt
    assert format_rubrics(tt) == tt.render()
