"""Plain data records passed between the pipeline stages."""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .coding_rate import UNIT_NORM_TOL
from .errors import InputError

SIDES = ("A", "B")
VERDICTS = ("A", "B", "Tie")
MAX_TIPS = 5

_LIST_MARKER = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+")


def rubric_id(text: str) -> str:
    """Stable content hash used as a rubric's identity."""
    return hashlib.sha256(text.strip().encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class PreferencePair:
    id: str
    query: str
    response_a: str
    response_b: str
    preferred: str
    critique: Optional[str] = None

    def __post_init__(self):
        if not self.id:
            raise InputError("pair id must be non-empty")
        if self.preferred not in SIDES:
            raise InputError(f"pair {self.id}: preferred must be 'A' or 'B', got {self.preferred!r}")
        for name in ("query", "response_a", "response_b"):
            if not getattr(self, name).strip():
                raise InputError(f"pair {self.id}: {name} is empty")

    @property
    def chosen(self) -> str:
        return self.response_a if self.preferred == "A" else self.response_b

    @property
    def rejected(self) -> str:
        return self.response_b if self.preferred == "A" else self.response_a

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "query": self.query,
            "response_a": self.response_a,
            "response_b": self.response_b,
            "preferred": self.preferred,
        }
        if self.critique is not None:
            d["critique"] = self.critique
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PreferencePair":
        allowed = {"id", "query", "response_a", "response_b", "preferred", "critique"}
        unknown = set(d) - allowed
        if unknown:
            raise InputError(f"unknown pair field(s): {sorted(unknown)}")
        missing = allowed - {"critique"} - set(d)
        if missing:
            raise InputError(f"missing pair field(s): {sorted(missing)}")
        for key in ("id", "query", "response_a", "response_b", "preferred"):
            if not isinstance(d[key], str):
                raise InputError(f"pair field {key!r} must be a string")
        critique = d.get("critique")
        if critique is not None and not isinstance(critique, str):
            raise InputError("pair field 'critique' must be a string or null")
        return cls(d["id"], d["query"], d["response_a"], d["response_b"], d["preferred"], critique)


@dataclass
class Rubric:
    id: str
    text: str
    source_pair_id: str = ""
    batch_iteration: int = 0
    refine_iterations: int = 0
    embedding: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.text.strip():
            raise InputError("rubric text must be non-empty")
        if _LIST_MARKER.match(self.text) or "\n" in self.text.strip():
            raise InputError(f"rubric must be a single criterion: {self.text!r}")
        if self.embedding is not None:
            self.embedding = np.asarray(self.embedding, dtype=float)
            norm = np.linalg.norm(self.embedding)
            if abs(norm - 1.0) > UNIT_NORM_TOL:
                raise InputError(f"rubric {self.id}: embedding norm {norm} is not 1")

    @classmethod
    def from_text(cls, text: str, **kwargs) -> "Rubric":
        text = text.strip()
        return cls(id=rubric_id(text), text=text, **kwargs)

    def to_dict(self, with_embedding: bool = True) -> dict:
        d = {
            "id": self.id,
            "text": self.text,
            "source_pair_id": self.source_pair_id,
            "batch_iteration": self.batch_iteration,
            "refine_iterations": self.refine_iterations,
        }
        if with_embedding and self.embedding is not None:
            d["embedding"] = [float(x) for x in self.embedding]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Rubric":
        emb = d.get("embedding")
        return cls(
            id=d["id"],
            text=d["text"],
            source_pair_id=d.get("source_pair_id", ""),
            batch_iteration=int(d.get("batch_iteration", 0)),
            refine_iterations=int(d.get("refine_iterations", 0)),
            embedding=None if emb is None else np.asarray(emb, dtype=float),
        )

    def __eq__(self, other):
        if not isinstance(other, Rubric):
            return NotImplemented
        same_emb = (self.embedding is None and other.embedding is None) or (
            self.embedding is not None
            and other.embedding is not None
            and np.array_equal(self.embedding, other.embedding)
        )
        return self.to_dict(with_embedding=False) == other.to_dict(with_embedding=False) and same_emb


@dataclass(frozen=True)
class Judgment:
    verdict: str
    raw_response: str

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise InputError(f"verdict must be one of {VERDICTS}, got {self.verdict!r}")


@dataclass
class Theme:
    theme: str
    tips: list[str] = field(default_factory=list)


@dataclass
class ThemeTipsRubric:
    themes: list[Theme]

    def validate(self, theme_count: int) -> None:
        if not 1 <= len(self.themes) <= theme_count:
            raise InputError(f"expected 1..{theme_count} themes, got {len(self.themes)}")
        for i, t in enumerate(self.themes, 1):
            if not t.theme.strip():
                raise InputError(f"theme {i} has an empty statement")
            if len(t.tips) > MAX_TIPS:
                raise InputError(f"theme {i} has {len(t.tips)} tips (max {MAX_TIPS})")
            if any(not tip.strip() for tip in t.tips):
                raise InputError(f"theme {i} has an empty tip")

    def render(self) -> str:
        """Theme/Tip text layout used inside judge prompts."""
        blocks = []
        for t in self.themes:
            lines = [f"Theme: {t.theme}"]
            lines += [f"-Tip {i}: {tip}" for i, tip in enumerate(t.tips, 1)]
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks)

    def without(self, index: int) -> "ThemeTipsRubric":
        return ThemeTipsRubric([t for i, t in enumerate(self.themes) if i != index])

    def to_dict(self) -> dict:
        return {"themes": [{"theme": t.theme, "tips": list(t.tips)} for t in self.themes]}

    @classmethod
    def from_dict(cls, d: dict) -> "ThemeTipsRubric":
        return cls([Theme(t["theme"], list(t.get("tips", []))) for t in d["themes"]])
