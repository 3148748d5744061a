"""Chat-completion backends.

Three interchangeable implementations share one method,
``complete(config, messages) -> str``:

* :class:`HttpBackend` posts to an OpenAI-compatible ``/v1/chat/completions``.
* :class:`ScriptedBackend` answers from a JSON script keyed by request digest.
* :class:`CallableBackend` delegates to a Python function (test oracles).

:class:`RecordingBackend` wraps any backend and captures its answers into a
script file that :class:`ScriptedBackend` can replay offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

import httpx

from .errors import (
    AuthError,
    DuplicateEntry,
    EmptyResponse,
    HttpStatusError,
    NetworkError,
    ParseError,
    ScriptMiss,
)

log = logging.getLogger(__name__)

ROLES = ("evaluator", "optimizer", "analyst", "judge")
MESSAGE_ROLES = ("system", "user", "assistant")

DEFAULT_TEMPERATURE = {"evaluator": 0.0, "optimizer": 1.0, "analyst": 0.7, "judge": 0.0}
DEFAULT_MODEL = {
    "evaluator": "Meta-Llama-3-70B-Instruct",
    "optimizer": "gpt-4",
    "analyst": "gpt-4",
    "judge": "gpt-4",
}
DEFAULT_BASE_URL = "https://api.openai.com"
API_KEY_ENV = "PLANFORGE_API_KEY"
BASE_URL_ENV = "PLANFORGE_BASE_URL"

RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


@dataclass(frozen=True)
class AgentConfig:
    role: str
    model_id: Optional[str] = None
    temperature: Optional[float] = None
    base_url: Optional[str] = None
    max_retries: int = 3

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown agent role {self.role!r}; expected one of {ROLES}")
        if self.model_id is None:
            object.__setattr__(self, "model_id", DEFAULT_MODEL[self.role])
        if self.temperature is None:
            object.__setattr__(self, "temperature", DEFAULT_TEMPERATURE[self.role])
        if not (0.0 <= self.temperature <= 2.0):
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")
        if self.base_url is None:
            object.__setattr__(self, "base_url", os.environ.get(BASE_URL_ENV, DEFAULT_BASE_URL))
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def to_dict(self) -> dict:
        return {
            "role": self.role,
            "model_id": self.model_id,
            "temperature": self.temperature,
            "base_url": self.base_url,
            "max_retries": self.max_retries,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AgentConfig":
        return cls(**{k: data[k] for k in ("role", "model_id", "temperature", "base_url", "max_retries") if k in data})


def default_configs() -> dict[str, AgentConfig]:
    return {role: AgentConfig(role) for role in ROLES}


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in MESSAGE_ROLES:
            raise ValueError(f"unknown message role {self.role!r}")
        if not self.content or not self.content.strip():
            raise ValueError("message content must be non-empty")


def user(content: str) -> ChatMessage:
    return ChatMessage("user", content)


def request_digest(role: str, messages: Sequence[ChatMessage]) -> str:
    """Stable key for a request: agent role plus the message sequence.

    Sampling settings (temperature, model) are deliberately left out so a
    recorded script survives retuning.
    """
    payload = json.dumps(
        {"role": role, "messages": [[m.role, m.content] for m in messages]},
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Backend(Protocol):
    def complete(self, config: AgentConfig, messages: Sequence[ChatMessage]) -> str: ...


def _check_messages(messages: Sequence[ChatMessage]) -> None:
    if not messages:
        raise ValueError("messages must be non-empty")


# ---------------------------------------------------------------------------
# Scripted replay
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Script:
    entries: dict[str, str] = field(default_factory=dict)
    fallback: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def lookup(self, role: str, messages: Sequence[ChatMessage]) -> str:
        digest = request_digest(role, messages)
        if digest in self.entries:
            return self.entries[digest]
        options = self.fallback.get(role)
        if options:
            # digest-indexed, not a cursor: the answer depends only on the request
            return options[int(digest[:16], 16) % len(options)]
        raise ScriptMiss(f"no scripted response for {role} request {digest[:12]}")

    def to_dict(self) -> dict:
        return {
            "entries": dict(sorted(self.entries.items())),
            "fallback": {role: list(opts) for role, opts in sorted(self.fallback.items())},
        }


def _reject_duplicates(pairs: list[tuple[str, object]]) -> dict:
    out: dict = {}
    for key, value in pairs:
        if key in out:
            raise DuplicateEntry(f"duplicate key {key!r} in script file")
        out[key] = value
    return out


def parse_script(text: str) -> Script:
    if not text.strip():
        raise ParseError("script file is empty")
    try:
        data = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ParseError(f"script is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError("script must be a JSON object")
    unknown = set(data) - {"entries", "fallback"}
    if unknown:
        raise ParseError(f"unknown script keys: {sorted(unknown)}")
    entries = data.get("entries", {})
    fallback = data.get("fallback", {})
    if not isinstance(entries, dict) or not all(isinstance(v, str) and v.strip() for v in entries.values()):
        raise ParseError("script entries must map digests to non-empty strings")
    if not isinstance(fallback, dict):
        raise ParseError("script fallback must be an object keyed by role")
    for role, opts in fallback.items():
        if role not in ROLES:
            raise ParseError(f"fallback for unknown role {role!r}")
        if not isinstance(opts, list) or not all(isinstance(o, str) and o.strip() for o in opts):
            raise ParseError(f"fallback for {role!r} must be a list of non-empty strings")
    return Script(dict(entries), {role: tuple(opts) for role, opts in fallback.items()})


def load_script(path) -> Script:
    return parse_script(Path(path).read_text(encoding="utf-8"))


def save_script(script: Script, path) -> None:
    Path(path).write_text(json.dumps(script.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


class ScriptedBackend:
    def __init__(self, script: Script):
        self.script = script

    def complete(self, config: AgentConfig, messages: Sequence[ChatMessage]) -> str:
        _check_messages(messages)
        return self.script.lookup(config.role, messages)


class CallableBackend:
    """Backend driven by ``fn(config, messages) -> str``."""

    def __init__(self, fn: Callable[[AgentConfig, Sequence[ChatMessage]], str]):
        self.fn = fn

    def complete(self, config: AgentConfig, messages: Sequence[ChatMessage]) -> str:
        _check_messages(messages)
        text = self.fn(config, messages)
        if not text or not text.strip():
            raise EmptyResponse("callable backend returned an empty response")
        return text


# ---------------------------------------------------------------------------
# Live HTTP
# ---------------------------------------------------------------------------


def build_request_body(config: AgentConfig, messages: Sequence[ChatMessage]) -> bytes:
    body = {
        "model": config.model_id,
        "temperature": config.temperature,
        "messages": [{"role": m.role, "content": m.content} for m in messages],
    }
    return json.dumps(body, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


class HttpBackend:
    """Client for OpenAI-compatible chat completion endpoints.

    Transient failures (transport errors, 429, 5xx) are retried with
    exponential backoff and full jitter: before retry k the client sleeps a
    uniform draw from [0, 2**k) seconds. Other 4xx responses fail at once.
    """

    def __init__(
        self,
        api_key: Optional[str] = None,
        client: Optional[httpx.Client] = None,
        timeout: float = 60.0,
        sleep: Callable[[float], None] = time.sleep,
        rng: Optional[random.Random] = None,
    ):
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.client = client or httpx.Client(timeout=timeout)
        self.sleep = sleep
        self.rng = rng or random.Random()

    def complete(self, config: AgentConfig, messages: Sequence[ChatMessage]) -> str:
        _check_messages(messages)
        if not self.api_key:
            raise AuthError(f"set {API_KEY_ENV} to use the http backend")
        url = config.base_url.rstrip("/") + "/v1/chat/completions"
        body = build_request_body(config, messages)
        headers = {"Authorization": f"Bearer {self.api_key}", "Content-Type": "application/json"}
        last_error = ""
        for attempt in range(config.max_retries + 1):
            if attempt:
                self.sleep(self.rng.uniform(0.0, 2.0 ** (attempt - 1)))
            try:
                resp = self.client.post(url, content=body, headers=headers)
            except httpx.TransportError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                log.warning("transport error on attempt %d: %s", attempt + 1, last_error)
                continue
            if resp.status_code == 200:
                return self._extract(resp)
            if resp.status_code in (401, 403):
                raise AuthError(f"endpoint rejected credentials (HTTP {resp.status_code})")
            if resp.status_code in RETRYABLE_STATUS:
                last_error = f"HTTP {resp.status_code}"
                log.warning("transient HTTP %d on attempt %d", resp.status_code, attempt + 1)
                continue
            raise HttpStatusError(resp.status_code, resp.text)
        raise NetworkError(f"giving up after {config.max_retries + 1} attempts ({last_error})")

    @staticmethod
    def _extract(resp: httpx.Response) -> str:
        try:
            data = resp.json()
            content = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise EmptyResponse(f"response has no choices[0].message.content: {exc}") from exc
        if "usage" in data:
            log.debug("usage: %s", data["usage"])
        if not isinstance(content, str) or not content.strip():
            raise EmptyResponse("model returned empty content")
        return content


class RecordingBackend:
    """Pass-through backend that captures every answer into a script."""

    def __init__(self, inner: Backend, path=None):
        self.inner = inner
        self.path = Path(path) if path else None
        self.entries: dict[str, str] = {}
        self._lock = threading.Lock()

    def complete(self, config: AgentConfig, messages: Sequence[ChatMessage]) -> str:
        text = self.inner.complete(config, messages)
        with self._lock:
            self.entries[request_digest(config.role, messages)] = text
        return text

    def script(self) -> Script:
        with self._lock:
            return Script(dict(self.entries))

    def save(self, path=None) -> None:
        target = Path(path) if path else self.path
        if target is None:
            raise ValueError("no path to save the recorded script to")
        save_script(self.script(), target)


def ask_parsed(backend: Backend, config: AgentConfig, messages: Sequence[ChatMessage], parse, reask: str):
    """Complete, parse, and on a parse failure re-ask exactly once.

    The re-ask appends the bad reply and ``reask`` to the conversation. A
    second failure propagates the parser's exception.
    """
    messages = list(messages)
    text = backend.complete(config, messages)
    try:
        return parse(text)
    except ParseError as exc:
        log.info("%s reply failed to parse (%s); re-asking once", config.role, exc)
        retry = messages + [ChatMessage("assistant", text), ChatMessage("user", f"{reask}\nProblem: {exc}")]
        return parse(backend.complete(config, retry))
