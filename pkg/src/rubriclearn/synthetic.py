"""Synthetic preference data and a rule-following chat mock.

Each synthetic pair is about one *topic* word. The preferred response uses
the topic word and the other does not. :class:`SyntheticChat` plays every
pipeline role from the prompt text alone: it proposes rubrics that mention
the query's topic, judges by counting rubric keywords in each response, and
groups suggestions by topic when asked to structure. With
:class:`~rubriclearn.backends.KeywordEmbedder` over the same topic words,
rubric embeddings for different topics are exactly orthogonal.
"""
from __future__ import annotations

import random
import re
from typing import Optional, Sequence

from .backends import ChatRequest, ChatResponse, tokenize
from .records import PreferencePair

DEFAULT_TOPICS = ("accuracy", "formatting", "clarity", "depth")

_SUBJECTS = (
    "tax law", "fantasy stories", "sql schemas", "sound cartoons", "audit findings",
    "dropshipping", "anime scenes", "translation", "regex syntax", "habit plans",
    "market entry", "therapy roleplay",
)

_PHRASES = (
    "Prefer the answer that shows {topic} about {subject}",
    "Reward {topic} in how the response handles {subject}",
)


def make_dataset(
    n_pairs: int,
    topics: Sequence[str] = DEFAULT_TOPICS,
    seed: int = 0,
    with_critique: bool = True,
) -> list[PreferencePair]:
    """``n_pairs`` pairs cycling through ``topics``; the preferred side is seeded."""
    rng = random.Random(seed)
    pairs = []
    for i in range(n_pairs):
        topic = topics[i % len(topics)]
        subject = _SUBJECTS[i % len(_SUBJECTS)]
        good = f"A reply about {subject} written with care for {topic} throughout."
        bad = f"A reply about {subject} that rambles without focus."
        preferred = rng.choice("AB")
        a, b = (good, bad) if preferred == "A" else (bad, good)
        critique = f"The better reply shows {topic}." if with_critique else None
        pairs.append(
            PreferencePair(f"p{i:03d}", f"Topic {topic}: question {i} on {subject}.", a, b, preferred, critique)
        )
    return pairs


def _section(prompt: str, header: str) -> str:
    m = re.search(rf"^## {re.escape(header)}\n(.*?)(?=^##|\Z)", prompt, re.S | re.M)
    return m.group(1).strip() if m else ""


class SyntheticChat:
    """Deterministic stand-in for every chat role in the pipeline.

    ``generic_first`` makes the first proposal for every pair topic-free, so
    the judge ties and the loop must revise once. ``rubrics_per_pair`` sets
    how many paraphrases of the topic rubric are proposed.
    """

    def __init__(self, topics: Sequence[str] = DEFAULT_TOPICS, rubrics_per_pair: int = 2, generic_first: bool = False):
        self.topics = [t.lower() for t in topics]
        self.rubrics_per_pair = rubrics_per_pair
        self.generic_first = generic_first
        self.calls = 0

    def _topic(self, text: str) -> Optional[str]:
        toks = tokenize(text)
        return next((t for t in toks if t in self.topics), None)

    def _rubric_lines(self, query: str, number: int) -> list[str]:
        topic = self._topic(query) or "helpfulness"
        subject = re.sub(r"^Topic \w+: question \d+ on |\.$", "", query).strip() or "the request"
        k = min(number, self.rubrics_per_pair)
        return [_PHRASES[i % len(_PHRASES)].format(topic=topic, subject=subject) for i in range(k)]

    def chat(self, request: ChatRequest) -> ChatResponse:
        self.calls += 1
        prompt = next(m.content for m in request.messages if m.role == "user")
        if prompt.startswith("##Task Description"):
            return ChatResponse(self._structure(prompt))
        if prompt.startswith("## Task Description"):
            return ChatResponse(self._judge(prompt))
        number = int(re.search(r"LESS THAN OR EQUAL TO (\d+)", prompt).group(1))
        query = _section(prompt, "Query")
        if "## Previous Round rubrics" not in prompt and self.generic_first:
            lines = ["Prefer the response that is polite"]
        else:
            lines = self._rubric_lines(query, number)
        return ChatResponse("<rubrics>\n" + "\n".join(lines) + "\n</rubrics>")

    def _judge(self, prompt: str) -> str:
        keys = {t for t in tokenize(_section(prompt, "Rubrics")) if t in self.topics}
        score_a = sum(t in keys for t in tokenize(_section(prompt, "Response A")))
        score_b = sum(t in keys for t in tokenize(_section(prompt, "Response B")))
        verdict = "A" if score_a > score_b else "B" if score_b > score_a else "tie"
        return f"Comparing against the rubrics.\n<preference>{verdict}</preference>"

    def _structure(self, prompt: str) -> str:
        suggestions = re.findall(r"<suggestion>\n?(.*?)\n?</suggestion>", prompt, re.S)
        groups: dict[str, list[str]] = {}
        for s in suggestions:
            groups.setdefault(self._topic(s) or "helpfulness", []).append(s.strip())
        blocks = []
        for topic, tips in list(groups.items())[:5]:
            lines = [f"Theme: The answer must demonstrate {topic} for every query."]
            lines += [f"-Tip {i}: {tip}" for i, tip in enumerate(tips[:5], 1)]
            blocks.append("\n".join(lines))
        return "<rubrics>\n" + "\n\n".join(blocks) + "\n</rubrics>"
