"""Prompt templates and parsers for tagged model output.

Templates live in ``templates/*.txt`` and are substituted in a single pass,
so placeholder-looking text inside a substituted value is left alone.
"""
from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources
from typing import Optional, Sequence, Union

from .errors import InputError
from .records import Rubric, Theme, ThemeTipsRubric

TEMPLATE_NAMES = ("propose", "judge", "revise", "structure")

_PLACEHOLDER = re.compile(r"\{([a-z_0-9]+)\}")
_THINK = re.compile(r"<think>.*?</think>", re.S | re.I)
_RUBRICS_BLOCK = re.compile(r"<rubrics>(.*?)</rubrics>", re.S | re.I)
_PREFERENCE = re.compile(r"<preference>\s*(a|b|tie)\s*</preference>", re.I)
_LINE_PREFIX = re.compile(r"^\s*(?:[-*•]+\s*|(?:\d+[.)]|\(\d+\))\s+)+")
_THEME_LINE = re.compile(r"^\s*(?:[-*]\s*)?\**\s*theme\s*\d*\s*\**\s*:\s*\**\s*(.*)$", re.I)
_TIP_LINE = re.compile(r"^\s*[-*•]?\s*\**\s*tip\s*\d*\s*\**\s*:\s*\**\s*(.*)$", re.I)


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    if name not in TEMPLATE_NAMES:
        raise KeyError(name)
    return resources.files("rubriclearn").joinpath("templates").joinpath(f"{name}.txt").read_text(encoding="utf-8")


def template_placeholders(name: str) -> list[str]:
    return list(dict.fromkeys(_PLACEHOLDER.findall(load_template(name))))


def render(name: str, **values: object) -> str:
    template = load_template(name)
    needed = set(template_placeholders(name))
    missing = needed - set(values)
    if missing:
        raise InputError(f"template {name!r} missing values for {sorted(missing)}")
    extra = set(values) - needed
    if extra:
        raise InputError(f"template {name!r} has no placeholders {sorted(extra)}")
    return _PLACEHOLDER.sub(lambda m: str(values[m.group(1)]) if m.group(1) in values else m.group(0), template)


RubricSet = Union[Sequence[Rubric], Sequence[str], ThemeTipsRubric]


def format_rubrics(rubrics: RubricSet) -> str:
    """Flat sets render one criterion per line; Theme-Tips sets use their own layout."""
    if isinstance(rubrics, ThemeTipsRubric):
        return rubrics.render()
    return "\n".join(r.text if isinstance(r, Rubric) else str(r) for r in rubrics)


def _strip_think(text: str) -> str:
    return _THINK.sub("", text)


def extract_rubrics_block(text: str) -> Optional[str]:
    """Body of the last ``<rubrics>...</rubrics>`` block, or None."""
    blocks = _RUBRICS_BLOCK.findall(_strip_think(text))
    return blocks[-1] if blocks else None


def parse_rubric_lines(text: str) -> list[str]:
    """Criteria from the ``<rubrics>`` block, bullets and numbering stripped, order kept."""
    block = extract_rubrics_block(text)
    if block is None:
        return []
    out: list[str] = []
    for line in block.splitlines():
        line = _LINE_PREFIX.sub("", line).strip()
        if line and line not in out:
            out.append(line)
    return out


def parse_preference(text: str) -> Optional[str]:
    """Verdict from the last ``<preference>`` tag: 'A', 'B', 'Tie' or None."""
    matches = _PREFERENCE.findall(_strip_think(text))
    if not matches:
        return None
    v = matches[-1].lower()
    return "Tie" if v == "tie" else v.upper()


def parse_theme_tips(text: str) -> Optional[ThemeTipsRubric]:
    """Theme/Tip hierarchy from the ``<rubrics>`` block.

    Returns None when there is no block, no theme, or a tip precedes every
    theme. Cardinality limits are checked separately.
    """
    block = extract_rubrics_block(text)
    if block is None:
        return None
    themes: list[Theme] = []
    for raw in block.splitlines():
        line = raw.strip()
        if not line:
            continue
        m = _THEME_LINE.match(line)
        if m:
            themes.append(Theme(m.group(1).strip().strip("*").strip()))
            continue
        m = _TIP_LINE.match(line)
        if m:
            if not themes:
                return None
            themes[-1].tips.append(m.group(1).strip().strip("*").strip())
            continue
        # wrapped continuation of the previous tip or theme
        if themes:
            if themes[-1].tips:
                themes[-1].tips[-1] = (themes[-1].tips[-1] + " " + line).strip()
            else:
                themes[-1].theme = (themes[-1].theme + " " + line).strip()
    return ThemeTipsRubric(themes) if themes else None
