"""Chat-completion HTTP generator with retry, rate limiting and offline replay."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import httpx

from retroplan.generator.base import GenerationResponse, TokenUsage, TransportError, estimate_tokens
from retroplan.generator.mock import response_from_text
from retroplan.generator.prompt import PromptConfig, build_prompt

log = logging.getLogger(__name__)

RETRYABLE_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


@dataclass(frozen=True)
class HttpConfig:
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4o"
    api_key_env: str = "RETROPLAN_API_KEY"
    timeout: float = 120.0
    max_attempts: int = 3
    backoff_base: float = 1.0
    requests_per_second: float | None = None
    burst: int = 1

    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env) or None


class TokenBucket:
    """Thread-safe token bucket; ``acquire`` blocks until a token is free."""

    def __init__(self, rate: float, capacity: int = 1,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        if rate <= 0 or capacity < 1:
            raise ValueError("rate must be > 0 and capacity >= 1")
        self.rate = rate
        self.capacity = capacity
        self._tokens = float(capacity)
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self):
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1:
                    self._tokens -= 1
                    return
                wait = (1 - self._tokens) / self.rate
            self._sleep(wait)


def request_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ResponseStore:
    """Line-delimited ``{"request_hash", "response"}`` pairs for record/replay."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._data: dict[str, dict] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        row = json.loads(line)
                        self._data[row["request_hash"]] = row
                    except (json.JSONDecodeError, KeyError, TypeError):
                        log.warning("ignoring bad line in %s", self.path)

    def __contains__(self, key: str) -> bool:
        return key in self._data

    def get(self, key: str) -> dict | None:
        return self._data.get(key)

    def put(self, key: str, text: str, usage: TokenUsage):
        row = {"request_hash": key, "response": text,
               "input_tokens": usage.input_tokens, "output_tokens": usage.output_tokens}
        with self._lock:
            self._data[key] = row
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")


class HttpGenerator:
    """Sends one prompt per call to a chat-completion endpoint.

    With ``replay`` set, stored responses are served without network access;
    unknown requests then fall through to the endpoint unless ``offline``.
    With ``record`` set, every live response is appended to that store.
    """

    def __init__(self, config: HttpConfig = HttpConfig(), *,
                 transport: httpx.BaseTransport | None = None,
                 replay: ResponseStore | None = None,
                 record: ResponseStore | None = None,
                 offline: bool = False,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self.replay = replay
        self.record = record
        self.offline = offline
        self._sleep = sleep
        self._limiter = (TokenBucket(config.requests_per_second, config.burst)
                         if config.requests_per_second else None)
        self._client = httpx.Client(timeout=config.timeout, transport=transport)

    def close(self):
        self._client.close()

    def payload(self, prompt: str, cfg: PromptConfig) -> dict:
        return {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
        }

    def _post(self, payload: dict) -> dict:
        headers = {"Content-Type": "application/json"}
        key = self.config.api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        last: Exception | None = None
        for attempt in range(self.config.max_attempts):
            if attempt:
                self._sleep(self.config.backoff_base * 2 ** (attempt - 1))
            if self._limiter:
                self._limiter.acquire()
            try:
                resp = self._client.post(self.config.endpoint, json=payload, headers=headers)
            except httpx.HTTPError as exc:
                last = exc
                log.warning("request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code in RETRYABLE_STATUS:
                last = TransportError(f"HTTP {resp.status_code}")
                log.warning("retryable status %d (attempt %d)", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError as exc:
                raise TransportError(f"non-JSON response: {exc}") from exc
        raise TransportError(f"gave up after {self.config.max_attempts} attempts: {last}")

    def complete(self, prompt: str, cfg: PromptConfig) -> tuple[str, TokenUsage]:
        payload = self.payload(prompt, cfg)
        key = request_hash(payload)
        if self.replay is not None:
            row = self.replay.get(key)
            if row is not None:
                usage = TokenUsage(int(row.get("input_tokens", estimate_tokens(prompt))),
                                   int(row.get("output_tokens", estimate_tokens(row["response"]))))
                return row["response"], usage
            if self.offline:
                raise TransportError(f"no recorded response for request {key[:12]}")
        data = self._post(payload)
        try:
            text = data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected response shape: {exc}") from exc
        u = data.get("usage") or {}
        usage = TokenUsage(int(u.get("prompt_tokens", estimate_tokens(prompt))),
                           int(u.get("completion_tokens", estimate_tokens(text))))
        if self.record is not None:
            self.record.put(key, text, usage)
        return text, usage

    def generate(self, molecule: str, examples: Sequence = (), cfg: PromptConfig | None = None,
                 seed: int | None = None) -> GenerationResponse:
        cfg = cfg or PromptConfig()
        prompt = build_prompt(molecule, examples, cfg)
        text, usage = self.complete(prompt, cfg)
        return response_from_text(text, usage)
