"""Pluggable text generation backends.

Three implementations of one interface:

  * RemoteGenerator: OpenAI-compatible chat-completion client with
    retry/backoff, for sampling a real teacher model behind an API.
  * MockGenerator: deterministic scripted double driven by a response
    table, for tests and offline end-to-end runs.
  * LocalGenerator: routes generation through a local policy model.

Backends are safe for concurrent calls from multiple workers; the
orchestrator above bounds in-flight parallelism.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import requests

from .errors import FbdpoError


class TransportError(FbdpoError):
    """Remote call failed after exhausting all retry attempts."""


class AuthError(FbdpoError):
    """Remote endpoint rejected the credentials (HTTP 401/403)."""


class MalformedResponse(FbdpoError):
    """Remote response body lacks the expected choices structure."""


class ScriptExhausted(FbdpoError):
    """The mock script has no further completion for a prompt."""


@dataclass(frozen=True)
class SamplingParams:
    """Decoding controls shared by every backend.

    temperature 0 means greedy decoding; top_p applies only when
    temperature > 0.
    """

    temperature: float
    top_p: float = 0.9
    max_new_tokens: int = 512
    seed: int = 0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError(f"temperature must be nonnegative, got {self.temperature}")
        if not 0 < self.top_p <= 1:
            raise ValueError(f"top_p must lie in (0, 1], got {self.top_p}")
        if self.max_new_tokens <= 0:
            raise ValueError(f"max_new_tokens must be positive, got {self.max_new_tokens}")
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")


class Generator:
    """Behavioral interface: generate(prompt, params) -> completion."""

    def generate(self, prompt: str, params: SamplingParams) -> str:
        raise NotImplementedError


def prompt_key(prompt: str) -> str:
    """Stable short key identifying a prompt in mock scripts."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]


class MockGenerator(Generator):
    """Scripted generator: each prompt consumes its canned completions in order.

    The script maps a prompt (verbatim or by its stable key) to an
    ordered completion list; the per-prompt cursor advances on every
    call, so tests can script "first attempt wrong, second right"
    scenarios. Identical sessions replay identical transcripts.
    """

    def __init__(self, script: dict[str, list[str]]):
        self._script = {k: list(v) for k, v in script.items()}
        self._cursor: dict[str, int] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "MockGenerator":
        """Load a script file: {"responses": [{"prompt"|"prompt_key", "completions": [...]}]}."""
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        script: dict[str, list[str]] = {}
        for entry in raw["responses"]:
            if "prompt_key" in entry:
                key = entry["prompt_key"]
            else:
                key = prompt_key(entry["prompt"])
            script.setdefault(key, []).extend(entry["completions"])
        return cls(script)

    def generate(self, prompt: str, params: SamplingParams) -> str:
        key = prompt_key(prompt)
        if key not in self._script:
            key = prompt  # scripts may also key on verbatim prompts
        with self._lock:
            if key not in self._script:
                raise ScriptExhausted(f"no scripted completions for prompt key {prompt_key(prompt)}")
            index = self._cursor.get(key, 0)
            completions = self._script[key]
            if index >= len(completions):
                raise ScriptExhausted(
                    f"prompt key {prompt_key(prompt)} called {index + 1} times, "
                    f"only {len(completions)} scripted"
                )
            self._cursor[key] = index + 1
            return completions[index]


_RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


class RemoteGenerator(Generator):
    """Client for OpenAI-compatible chat-completion endpoints.

    Sends the rendered prompt as a single user message (the persona
    line lives inside the prompt template). Transient failures (HTTP
    429/5xx, timeouts) retry with exponential backoff; auth failures
    do not retry.
    """

    def __init__(self,
                 endpoint: str,
                 model_name: str,
                 max_attempts: int = 3,
                 backoff_base: float = 1.0,
                 timeout: float = 120.0,
                 session: requests.Session | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.endpoint = endpoint.rstrip("/")
        self.model_name = model_name
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.timeout = timeout
        self._session = session or requests.Session()
        self._sleep = sleep

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get("FBDPO_API_KEY") or os.environ.get("OPENAI_API_KEY")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def generate(self, prompt: str, params: SamplingParams) -> str:
        payload = {
            "model": self.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_new_tokens,
            "seed": params.seed,
        }
        if params.temperature > 0:
            payload["top_p"] = params.top_p
        url = f"{self.endpoint}/v1/chat/completions"
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt > 0:
                self._sleep(self.backoff_base * 2 ** (attempt - 1))
            try:
                response = self._session.post(
                    url, json=payload, headers=self._headers(), timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code in (401, 403):
                raise AuthError(f"endpoint rejected credentials (HTTP {response.status_code})")
            if response.status_code in _RETRYABLE_STATUS:
                last_error = TransportError(f"HTTP {response.status_code}")
                continue
            if response.status_code != 200:
                raise TransportError(f"HTTP {response.status_code}: {response.text[:200]}")
            try:
                body = response.json()
                return body["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise MalformedResponse(f"unexpected response shape: {exc}") from exc
        raise TransportError(f"giving up after {self.max_attempts} attempts: {last_error}")


class LocalGenerator(Generator):
    """Generator backed by a local policy model.

    Construction happens lazily through the policy module to avoid a
    circular import; byte-deterministic given the params seed.
    """

    def __init__(self, model, tokenizer, use_adapters: bool = True):
        self._model = model
        self._tokenizer = tokenizer
        self._use_adapters = use_adapters
        self._lock = threading.Lock()

    def generate(self, prompt: str, params: SamplingParams) -> str:
        from .policy import sample

        with self._lock:  # torch module forward is not reentrant-safe here
            return sample(self._model, self._tokenizer, prompt, params,
                          use_adapters=self._use_adapters)
