"""Chat-completion clients: an OpenAI-compatible HTTP client and deterministic mocks.

Every client implements ``complete(prompt, config) -> str`` and the richer
``complete_detailed`` that also reports truncation.  ``batch_complete`` fans a
list of prompts out over a bounded thread pool and keeps input order.
"""

from __future__ import annotations

import hashlib
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import httpx

from .errors import (
    AuthMissing,
    ClientError,
    CompletionTimeout,
    ContextOverflow,
    HttpStatusError,
    MockMiss,
    TransportError,
)

log = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "LLM_API_KEY"
BODY_EXCERPT = 500


@dataclass(frozen=True)
class GenerationConfig:
    """Decoding and retry settings.  Decoding is greedy: temperature 0, no sampling."""

    max_tokens: int = 2000
    temperature: float = 0.0
    stop: tuple[str, ...] | None = None
    timeout: float = 120.0
    max_retries: int = 3
    backoff_initial: float = 1.0
    backoff_multiplier: float = 2.0
    seed: int | None = None

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.backoff_initial < 0 or self.backoff_multiplier < 1:
            raise ValueError("backoff needs initial >= 0 and multiplier >= 1")
        if self.stop is not None:
            object.__setattr__(self, "stop", tuple(self.stop))

    def backoff(self, attempt: int) -> float:
        """Delay before retry number ``attempt`` (0-based)."""
        return self.backoff_initial * self.backoff_multiplier**attempt


@dataclass(frozen=True)
class Completion:
    text: str
    finish_reason: str | None = None
    truncated: bool = False


@dataclass
class ClientStats:
    requests: int = 0
    retries: int = 0
    failures: int = 0
    backoffs: list[float] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def bump(self, name: str, delay: float | None = None) -> None:
        with self._lock:
            setattr(self, name, getattr(self, name) + 1)
            if delay is not None:
                self.backoffs.append(delay)


class CompletionClient:
    """Base class.  Subclasses implement :meth:`complete_detailed`."""

    def complete_detailed(self, prompt: str, config: GenerationConfig) -> Completion:
        raise NotImplementedError

    def complete(self, prompt: str, config: GenerationConfig | None = None) -> str:
        return self.complete_detailed(prompt, config or GenerationConfig()).text


# --------------------------------------------------------------------------
# HTTP client

_BEARER_RE = re.compile(r"(?i)(bearer\s+)[A-Za-z0-9._\-]+")
_KEYLIKE_RE = re.compile(r"\b(sk-[A-Za-z0-9_\-]{6,})")


def redact(text: str, secrets: Iterable[str] = ()) -> str:
    """Mask credentials: the given secrets, bearer tokens and ``sk-`` style keys."""
    for s in secrets:
        if s:
            text = text.replace(s, "***")
    text = _BEARER_RE.sub(r"\1***", text)
    return _KEYLIKE_RE.sub("***", text)


_OVERFLOW_HINTS = ("context_length", "maximum context length", "context window")


class OpenAICompatibleClient(CompletionClient):
    """Client for ``POST {base_url}/chat/completions``.

    The prompt becomes one user message.  The credential is read from the
    environment variable ``api_key_env`` (``None`` disables auth, for local
    servers).  ``transport`` and ``sleep`` are injectable for tests.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        *,
        api_key_env: str | None = DEFAULT_API_KEY_ENV,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        extra_headers: Mapping[str, str] | None = None,
    ):
        self.url = base_url.rstrip("/")
        if not self.url.endswith("/chat/completions"):
            self.url += "/chat/completions"
        self.model = model
        self._api_key = None
        if api_key_env:
            self._api_key = os.environ.get(api_key_env)
            if not self._api_key:
                raise AuthMissing(f"environment variable {api_key_env} is not set")
        headers = {"Content-Type": "application/json", **(extra_headers or {})}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        self._http = httpx.Client(headers=headers, transport=transport)
        self._sleep = sleep
        self.stats = ClientStats()

    def close(self) -> None:
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def request_body(self, prompt: str, config: GenerationConfig) -> dict:
        body: dict = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": config.max_tokens,
            "temperature": config.temperature,
        }
        if config.stop:
            body["stop"] = list(config.stop)
        if config.seed is not None:
            body["seed"] = config.seed
        return body

    def _redact(self, text: str) -> str:
        return redact(text, [self._api_key] if self._api_key else [])

    def _once(self, prompt: str, config: GenerationConfig) -> Completion:
        self.stats.bump("requests")
        try:
            resp = self._http.post(self.url, json=self.request_body(prompt, config), timeout=config.timeout)
        except httpx.TimeoutException as exc:
            raise CompletionTimeout(f"no response within {config.timeout}s") from exc
        except httpx.TransportError as exc:
            raise TransportError(type(exc).__name__, self._redact(str(exc))) from exc
        if resp.status_code >= 400:
            body = self._redact(resp.text[:BODY_EXCERPT])
            if resp.status_code == 400 and any(h in body.lower() for h in _OVERFLOW_HINTS):
                raise ContextOverflow(resp.status_code, body)
            raise HttpStatusError(resp.status_code, body)
        try:
            choice = resp.json()["choices"][0]
            text = choice["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError("malformed_response", self._redact(resp.text[:BODY_EXCERPT])) from exc
        finish = choice.get("finish_reason")
        return Completion(text, finish, finish == "length")

    def complete_detailed(self, prompt: str, config: GenerationConfig) -> Completion:
        attempt = 0
        while True:
            try:
                return self._once(prompt, config)
            except ClientError as exc:
                if not exc.retryable or attempt >= config.max_retries:
                    self.stats.bump("failures")
                    raise
                delay = config.backoff(attempt)
                log.info("retrying after %s (attempt %d, sleeping %.2fs)", type(exc).__name__, attempt + 1, delay)
                self.stats.bump("retries", delay)
                self._sleep(delay)
                attempt += 1


# --------------------------------------------------------------------------
# mocks


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class MockClient(CompletionClient):
    """Shared bookkeeping: call log and peak concurrency."""

    def __init__(self, delay: float = 0.0):
        self.delay = delay
        self.calls: list[str] = []
        self.max_concurrency = 0
        self._active = 0
        self._lock = threading.Lock()

    def _respond(self, prompt: str) -> str:
        raise NotImplementedError

    def complete_detailed(self, prompt: str, config: GenerationConfig) -> Completion:
        with self._lock:
            self._active += 1
            self.max_concurrency = max(self.max_concurrency, self._active)
            self.calls.append(prompt)
        try:
            if self.delay:
                time.sleep(self.delay)
            text = self._respond(prompt)
        finally:
            with self._lock:
                self._active -= 1
        return Completion(text, "stop", False)


class EchoGoldClient(MockClient):
    """Answers each staged prompt with the response staged for it (normally the gold)."""

    def __init__(self, responses: Mapping[str, str] | None = None, delay: float = 0.0):
        super().__init__(delay)
        self.responses: dict[str, str] = dict(responses or {})

    def stage(self, prompt: str, response: str) -> None:
        self.responses[prompt] = response

    def _respond(self, prompt: str) -> str:
        try:
            return self.responses[prompt]
        except KeyError:
            raise MockMiss(f"no gold staged for prompt {prompt_hash(prompt)[:12]}") from None


class CannedClient(MockClient):
    """Looks responses up by the sha256 hex digest of the prompt."""

    def __init__(self, by_hash: Mapping[str, str], default: str | None = None, delay: float = 0.0):
        super().__init__(delay)
        self.by_hash = dict(by_hash)
        self.default = default

    def _respond(self, prompt: str) -> str:
        h = prompt_hash(prompt)
        if h in self.by_hash:
            return self.by_hash[h]
        if self.default is not None:
            return self.default
        raise MockMiss(f"no canned response for prompt {h[:12]}")


_GARBAGE = (
    "I am not sure about this one [see above] ( [ ] ) {tag}",
    "]] answer withheld [[ {tag}",
    "Sources: [a] [b] [-1] {tag}",
    "[ [ nested ] text {tag}",
)


class FaultInjector(CompletionClient):
    """Wraps a client and deterministically breaks some prompts.

    For each prompt a uniform draw derived from ``seed`` and the prompt hash
    decides: below ``failure_rate`` the call raises a permanent
    :class:`TransportError`; below ``failure_rate + malformed_rate`` it returns
    garbage carrying no valid citation; otherwise it delegates.
    """

    def __init__(self, base: CompletionClient, failure_rate: float = 0.0, malformed_rate: float = 0.0, seed: int = 0):
        if failure_rate < 0 or malformed_rate < 0 or failure_rate + malformed_rate > 1:
            raise ValueError("rates must be non-negative and sum to at most 1")
        self.base = base
        self.failure_rate = failure_rate
        self.malformed_rate = malformed_rate
        self.seed = seed

    def _draw(self, prompt: str) -> tuple[float, str]:
        h = hashlib.sha256(f"{self.seed}\x00{prompt}".encode()).hexdigest()
        return int(h[:13], 16) / 16**13, h

    def complete_detailed(self, prompt: str, config: GenerationConfig) -> Completion:
        u, h = self._draw(prompt)
        if u < self.failure_rate:
            raise TransportError("injected", f"fault for prompt {h[:12]}")
        if u < self.failure_rate + self.malformed_rate:
            text = _GARBAGE[int(h[13:15], 16) % len(_GARBAGE)].format(tag=h[:8])
            return Completion(text, "stop", False)
        return self.base.complete_detailed(prompt, config)


# --------------------------------------------------------------------------
# batching


@dataclass(frozen=True)
class BatchResult:
    text: str | None
    error: str | None = None
    truncated: bool = False
    error_type: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _one(client: CompletionClient, prompt: str, config: GenerationConfig) -> BatchResult:
    try:
        c = client.complete_detailed(prompt, config)
    except ClientError as exc:
        return BatchResult(None, str(exc), False, type(exc).__name__)
    return BatchResult(c.text, None, c.truncated)


def batch_complete(
    client: CompletionClient,
    prompts: Sequence[str],
    config: GenerationConfig | None = None,
    max_in_flight: int = 4,
) -> list[BatchResult]:
    """Complete every prompt with at most ``max_in_flight`` concurrent calls.

    Results align with ``prompts``; a failing prompt yields a result with
    ``error`` set instead of raising.
    """
    if max_in_flight < 1:
        raise ValueError("max_in_flight must be >= 1")
    config = config or GenerationConfig()
    if max_in_flight == 1 or len(prompts) <= 1:
        return [_one(client, p, config) for p in prompts]
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(lambda p: _one(client, p, config), prompts))


__all__ = [
    "DEFAULT_API_KEY_ENV",
    "GenerationConfig",
    "Completion",
    "ClientStats",
    "CompletionClient",
    "OpenAICompatibleClient",
    "redact",
    "prompt_hash",
    "MockClient",
    "EchoGoldClient",
    "CannedClient",
    "FaultInjector",
    "BatchResult",
    "batch_complete",
]
