"""Run configuration: one flat dotted key space loaded from YAML or JSON.

Files may nest sections (``selection: {tau_min: ...}``) or spell keys flat
(``selection.tau_min: ...``); both flatten to the same keys. Unknown keys are
rejected. Secrets come only from the environment.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

import yaml

from .backends import (
    BackendConfig,
    CachedEmbedder,
    HashEmbedder,
    KeywordEmbedder,
    OpenAIChat,
    OpenAIEmbedder,
)
from .coding_rate import CodingRateParams
from .diagnostics import VotingConfig
from .errors import ConfigError, InputError
from .pipeline import PipelineConfig
from .selection import SelectionConfig
from .synthetic import SyntheticChat

CHAT_KINDS = ("openai", "synthetic")
EMBED_KINDS = ("openai", "hash", "keyword")


def flatten(d: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, Mapping):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def default_values() -> dict[str, Any]:
    text = resources.files("rubriclearn").joinpath("data").joinpath("default_config.yaml").read_text(encoding="utf-8")
    return flatten(yaml.safe_load(text))


def _read_file(path: Union[str, Path]) -> dict[str, Any]:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: cannot parse config ({exc})") from exc
    if data is None:
        return {}
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path}: config must be a mapping")
    return flatten(data)


def parse_override(item: str) -> tuple[str, Any]:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not KEY=VALUE")
    key, raw = item.split("=", 1)
    return key.strip(), yaml.safe_load(raw) if raw.strip() else None


def load_values(path: Optional[Union[str, Path]] = None, overrides: Sequence[str] = ()) -> dict[str, Any]:
    values = default_values()
    layers = []
    if path is not None:
        layers.append(_read_file(path))
    layers.append(dict(parse_override(o) for o in overrides))
    for layer in layers:
        unknown = sorted(set(layer) - set(values))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        values.update(layer)
    return values


@dataclass
class RunConfig:
    values: dict[str, Any]

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None, overrides: Sequence[str] = ()) -> "RunConfig":
        cfg = cls(load_values(path, overrides))
        cfg.validate()
        return cfg

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def validate(self) -> None:
        self.pipeline()
        self.voting()
        if self["backend.chat.kind"] not in CHAT_KINDS:
            raise ConfigError(f"backend.chat.kind must be one of {CHAT_KINDS}")
        if self["backend.judge.kind"] not in (None, *CHAT_KINDS):
            raise ConfigError(f"backend.judge.kind must be null or one of {CHAT_KINDS}")
        if self["backend.embed.kind"] not in EMBED_KINDS:
            raise ConfigError(f"backend.embed.kind must be one of {EMBED_KINDS}")
        self.backend_config("chat")
        self.backend_config("embed")

    def _typed(self, key: str, typ):
        v = self[key]
        if typ is float and isinstance(v, int) and not isinstance(v, bool):
            v = float(v)
        if not isinstance(v, typ) or isinstance(v, bool) and typ is not bool:
            raise ConfigError(f"{key} must be {typ.__name__}, got {v!r}")
        return v

    def selection(self) -> SelectionConfig:
        try:
            params = CodingRateParams(self._typed("selection.epsilon", float), self._typed("selection.jitter", float))
            max_size = self["selection.max_size"]
            if max_size is not None:
                max_size = self._typed("selection.max_size", int)
            return SelectionConfig(
                max_size, self._typed("selection.tau_min", float), self._typed("selection.patience", int), params
            )
        except InputError as exc:
            raise ConfigError(str(exc)) from exc

    def pipeline(self) -> PipelineConfig:
        try:
            return PipelineConfig(
                batch_size=self._typed("pipeline.batch_size", int),
                e_max=self._typed("pipeline.e_max", int),
                max_rubrics_per_pair=self._typed("pipeline.max_rubrics_per_pair", int),
                selection=self.selection(),
                theme_count=self._typed("pipeline.theme_count", int),
                seed=self._typed("pipeline.seed", int),
                max_batch_iterations=self._typed("pipeline.max_batch_iterations", int),
                parallelism=self._typed("pipeline.parallelism", int),
            )
        except InputError as exc:
            raise ConfigError(str(exc)) from exc

    def voting(self) -> VotingConfig:
        try:
            return VotingConfig(
                self._typed("voting.n_votes", int), self._typed("voting.seed", int), self._typed("voting.shuffle", bool)
            )
        except InputError as exc:
            raise ConfigError(str(exc)) from exc

    def backend_config(self, role: str) -> BackendConfig:
        """Settings for ``chat``, ``judge`` or ``embed``; null judge fields inherit from chat."""
        p = f"backend.{role}."

        def get(key, default=None):
            v = self.values.get(p + key)
            return self.values.get("backend.chat." + key, default) if v is None else v

        return BackendConfig(
            base_url=str(get("base_url")),
            model_name=str(get("model_name")),
            api_key_env=str(get("api_key_env")),
            timeout=float(get("timeout")),
            max_retries=int(get("max_retries")),
            temperature=float(get("temperature", 0.0)),
        )

    def synthetic_topics(self) -> list[str]:
        return [str(t) for t in self["synthetic.topics"]]

    def chat_backend(self, role: str = "chat"):
        kind = self["backend.chat.kind"] if role == "chat" or self["backend.judge.kind"] is None else self["backend.judge.kind"]
        if kind == "synthetic":
            return SyntheticChat(
                self.synthetic_topics(), int(self["synthetic.rubrics_per_pair"]), bool(self["synthetic.generic_first"])
            )
        return OpenAIChat(self.backend_config(role))

    def embed_backend(self):
        kind = self["backend.embed.kind"]
        if kind == "hash":
            inner = HashEmbedder(int(self["backend.embed.dim"]), int(self["backend.embed.seed"]))
        elif kind == "keyword":
            inner = KeywordEmbedder(self["backend.embed.keywords"] or self.synthetic_topics())
        else:
            inner = OpenAIEmbedder(self.backend_config("embed"))
        cache = self["paths.embedding_cache"]
        return CachedEmbedder(inner, cache) if cache else inner

    def to_dict(self) -> dict[str, Any]:
        return dict(sorted(self.values.items()))
