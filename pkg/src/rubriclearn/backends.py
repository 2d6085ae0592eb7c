"""Chat and embedding backends.

One wire implementation talks to OpenAI-compatible HTTP endpoints; the rest
are deterministic in-process stand-ins used by tests, demos and dry runs.
Every chat backend exposes ``chat(request) -> ChatResponse`` and every
embedder exposes ``embed(texts) -> ndarray`` of shape ``(len(texts), dim)``
with unit-norm rows.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

import httpx
import numpy as np

from .coding_rate import normalize_vector
from .errors import ConfigError, InputError, ProtocolError, ScriptExhaustedError, TransportError

logger = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "RUBRIC_API_KEY"
EMBED_BATCH = 64
RETRYABLE_STATUS = {429, 500, 502, 503, 504}


@dataclass(frozen=True)
class BackendConfig:
    base_url: str = "http://localhost:8000/v1"
    model_name: str = "qwen3-32b"
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout: float = 60.0
    max_retries: int = 3
    temperature: float = 0.0

    def __post_init__(self):
        if not 0 <= self.max_retries <= 5:
            raise ConfigError(f"max_retries must be in [0, 5], got {self.max_retries}")
        if not self.timeout > 0:
            raise ConfigError(f"timeout must be > 0, got {self.timeout}")
        if not 0 <= self.temperature <= 2:
            raise ConfigError(f"temperature must be in [0, 2], got {self.temperature}")

    def api_key(self) -> str:
        key = os.environ.get(self.api_key_env, "").strip()
        if not key:
            raise ConfigError(f"environment variable {self.api_key_env} is not set")
        return key


@dataclass(frozen=True)
class Message:
    role: str
    content: str


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[Message, ...]
    temperature: Optional[float] = None

    def __post_init__(self):
        if not any(m.role == "user" for m in self.messages):
            raise InputError("chat request needs at least one user message")
        for m in self.messages:
            if m.role not in ("system", "user", "assistant"):
                raise InputError(f"unsupported role {m.role!r}")

    @classmethod
    def user(cls, content: str, temperature: Optional[float] = None, system: Optional[str] = None) -> "ChatRequest":
        msgs = ((Message("system", system),) if system else ()) + (Message("user", content),)
        return cls(msgs, temperature)

    @property
    def prompt(self) -> str:
        """Content of the last user message."""
        return next(m.content for m in reversed(self.messages) if m.role == "user")


@dataclass(frozen=True)
class ChatResponse:
    content: str
    usage: dict = field(default_factory=dict)


# -- HTTP ---------------------------------------------------------------------


def _backoff_delay(attempt: int, rng: random.Random) -> float:
    # base 1s, factor 2, full jitter in [0.5, 1.0] of the nominal delay
    return (2.0 ** attempt) * (0.5 + 0.5 * rng.random())


class HttpTransport:
    """POST JSON with retry on 429/5xx/timeouts and immediate failure on auth errors."""

    def __init__(
        self,
        config: BackendConfig,
        client: Optional[httpx.Client] = None,
        sleep: Callable[[float], None] = time.sleep,
        seed: int = 0,
        max_connections: int = 8,
    ):
        self.config = config
        self._client = client or httpx.Client(
            timeout=config.timeout, limits=httpx.Limits(max_connections=max_connections)
        )
        self._sleep = sleep
        self._rng = random.Random(seed)
        self._slots = threading.BoundedSemaphore(max_connections)
        self.attempts = 0

    def post(self, path: str, body: dict) -> dict:
        url = self.config.base_url.rstrip("/") + path
        headers = {"Authorization": f"Bearer {self.config.api_key()}"}
        last: Optional[str] = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._sleep(_backoff_delay(attempt - 1, self._rng))
            self.attempts += 1
            try:
                with self._slots:
                    resp = self._client.post(url, json=body, headers=headers, timeout=self.config.timeout)
            except httpx.TimeoutException as exc:
                last = f"timeout: {exc}"
                continue
            except httpx.TransportError as exc:
                last = f"transport: {exc}"
                continue
            if resp.status_code in (401, 403):
                raise ConfigError(f"{url} rejected credentials (HTTP {resp.status_code})")
            if resp.status_code in RETRYABLE_STATUS:
                last = f"HTTP {resp.status_code}"
                logger.warning("%s returned %s (attempt %d)", url, resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise TransportError(f"{url} returned HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError as exc:
                raise ProtocolError(f"{url} returned non-JSON body") from exc
        raise TransportError(f"{url} failed after {self.config.max_retries + 1} attempts ({last})")


def chat(request: ChatRequest, config: BackendConfig, transport: Optional[HttpTransport] = None) -> ChatResponse:
    transport = transport or HttpTransport(config)
    temperature = config.temperature if request.temperature is None else request.temperature
    body = {
        "model": config.model_name,
        "messages": [{"role": m.role, "content": m.content} for m in request.messages],
        "temperature": temperature,
    }
    data = transport.post("/chat/completions", body)
    try:
        content = data["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ProtocolError(f"malformed chat completion body: {str(data)[:200]}") from exc
    if content is None:
        content = ""
    if not isinstance(content, str):
        raise ProtocolError("chat completion content is not a string")
    return ChatResponse(content, dict(data.get("usage") or {}))


def _check_texts(texts: Sequence[str]) -> list[str]:
    texts = list(texts)
    if not texts:
        raise InputError("embed() needs at least one text")
    for i, t in enumerate(texts):
        if not isinstance(t, str) or not t.strip():
            raise InputError(f"text {i} is empty")
    return texts


def embed(texts: Sequence[str], config: BackendConfig, transport: Optional[HttpTransport] = None) -> np.ndarray:
    texts = _check_texts(texts)
    transport = transport or HttpTransport(config)
    rows: list[np.ndarray] = []
    for start in range(0, len(texts), EMBED_BATCH):
        chunk = texts[start:start + EMBED_BATCH]
        data = transport.post("/embeddings", {"model": config.model_name, "input": chunk})
        try:
            items = data["data"]
            if len(items) != len(chunk):
                raise ProtocolError(f"expected {len(chunk)} embeddings, got {len(items)}")
            # servers may return items out of order; "index" is authoritative when present
            ordered = sorted(items, key=lambda it: it.get("index", 0)) if all("index" in it for it in items) else items
            rows += [normalize_vector(it["embedding"]) for it in ordered]
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed embeddings body: {str(data)[:200]}") from exc
    return np.vstack(rows)


class OpenAIChat:
    def __init__(self, config: BackendConfig, transport: Optional[HttpTransport] = None):
        self.config = config
        self.transport = transport or HttpTransport(config)

    def chat(self, request: ChatRequest) -> ChatResponse:
        return chat(request, self.config, self.transport)


class OpenAIEmbedder:
    def __init__(self, config: BackendConfig, transport: Optional[HttpTransport] = None):
        self.config = config
        self.model_name = config.model_name
        self.transport = transport or HttpTransport(config)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return embed(texts, self.config, self.transport)


# -- in-process mocks -----------------------------------------------------------

Responder = Union[str, Callable[[ChatRequest], str]]


class ScriptedChat:
    """Replays canned responses deterministically.

    ``responses`` are consumed in order. ``rules`` is a list of
    ``(regex, response)`` pairs matched against the prompt; the first match
    wins and a rule's response may be a callable taking the request. Rules
    are consulted before the ordered script. Once both are exhausted the mock
    raises :class:`ScriptExhaustedError`.
    """

    def __init__(self, responses: Iterable[Responder] = (), rules: Sequence[tuple[str, Responder]] = ()):
        self._queue = list(responses)
        self._rules = [(re.compile(p, re.S), r) for p, r in rules]
        self._lock = threading.Lock()
        self.requests: list[ChatRequest] = []

    def chat(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.requests.append(request)
            for pattern, responder in self._rules:
                if pattern.search(request.prompt):
                    break
            else:
                if not self._queue:
                    raise ScriptExhaustedError(f"script exhausted after {len(self.requests) - 1} responses")
                responder = self._queue.pop(0)
        content = responder(request) if callable(responder) else responder
        return ChatResponse(content, {})

    @property
    def prompts(self) -> list[str]:
        return [r.prompt for r in self.requests]


def scripted_mock(script: Union[Sequence[Responder], Sequence[tuple[str, Responder]], dict]) -> ScriptedChat:
    """Build a :class:`ScriptedChat` from an ordered list or keyword rules."""
    if isinstance(script, dict):
        return ScriptedChat(rules=list(script.items()))
    script = list(script)
    if script and all(isinstance(s, tuple) for s in script):
        return ScriptedChat(rules=script)
    return ScriptedChat(responses=script)


_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


class HashEmbedder:
    """Seeded random projection of token-count features.

    Each token maps to a fixed Gaussian direction derived from a hash of
    ``(seed, token)``; a text embeds as the normalized count-weighted sum.
    Identical texts give identical vectors, and texts with disjoint
    vocabularies are nearly orthogonal when ``dim`` is large.
    """

    def __init__(self, dim: int = 256, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self.model_name = f"hash-{dim}-{seed}"
        self._cache: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        v = self._cache.get(token)
        if v is None:
            h = hashlib.sha256(f"{self.seed}:{token}".encode()).digest()
            v = np.random.default_rng(int.from_bytes(h[:8], "little")).standard_normal(self.dim)
            self._cache[token] = v
        return v

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = _check_texts(texts)
        out = np.zeros((len(texts), self.dim))
        for i, text in enumerate(texts):
            toks = tokenize(text) or [text]
            for tok in toks:
                out[i] += self._token_vector(tok)
            out[i] = normalize_vector(out[i])
        return out


class KeywordEmbedder:
    """Bag-of-keywords features: one axis per keyword, plus a residual axis.

    Texts sharing no keyword are exactly orthogonal, which makes selection
    geometry fully controllable in tests.
    """

    def __init__(self, keywords: Sequence[str]):
        self.keywords = [k.lower() for k in keywords]
        self._axis = {k: i for i, k in enumerate(self.keywords)}
        self.dim = len(self.keywords) + 1
        self.model_name = "keyword-" + "-".join(self.keywords)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = _check_texts(texts)
        out = np.zeros((len(texts), self.dim))
        for i, text in enumerate(texts):
            for tok in tokenize(text):
                j = self._axis.get(tok)
                if j is not None:
                    out[i, j] += 1.0
            if not out[i].any():
                out[i, -1] = 1.0
            out[i] = normalize_vector(out[i])
        return out


class CachedEmbedder:
    """Wraps an embedder with a cache keyed by ``(model_name, sha256(text))``.

    With ``path`` set, the cache persists as JSON so reruns skip paid calls.
    """

    def __init__(self, inner, path: Optional[Union[str, Path]] = None):
        self.inner = inner
        self.model_name = getattr(inner, "model_name", type(inner).__name__)
        self.path = Path(path) if path else None
        self._lock = threading.Lock()
        self._store: dict[str, list[float]] = {}
        self.misses = 0
        if self.path and self.path.exists():
            self._store = json.loads(self.path.read_text())

    def _key(self, text: str) -> str:
        return self.model_name + ":" + hashlib.sha256(text.encode("utf-8")).hexdigest()

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = _check_texts(texts)
        with self._lock:
            todo = list(dict.fromkeys(t for t in texts if self._key(t) not in self._store))
        if todo:
            vecs = self.inner.embed(todo)
            with self._lock:
                for t, v in zip(todo, vecs):
                    self._store[self._key(t)] = [float(x) for x in v]
                self.misses += len(todo)
                self._save()
        with self._lock:
            return np.array([self._store[self._key(t)] for t in texts])

    def _save(self) -> None:
        if self.path is None:
            return
        from .io import atomic_write_text

        atomic_write_text(self.path, json.dumps(self._store))
