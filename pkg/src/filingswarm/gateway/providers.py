"""Scripted, recording, and remote completion providers plus fixture I/O."""
from __future__ import annotations

import json
import os
import threading
import time
from pathlib import Path
from typing import Iterable, Protocol

import requests

from .types import (
    ChatRequest,
    ChatResponse,
    FixtureMissError,
    GatewayError,
    RateLimitError,
    RemoteError,
    request_digest,
)


class Provider(Protocol):
    provider_id: str

    def complete(self, request: ChatRequest) -> ChatResponse: ...


class ScriptedProvider:
    """Replays canned responses keyed by request digest.

    A missing digest raises instead of degrading; a scripted run that
    silently answered from some other source would not be a replay.
    """

    provider_id = "scripted"

    def __init__(self, fixtures: dict[str, str]):
        self.fixtures = dict(fixtures)

    def complete(self, request: ChatRequest) -> ChatResponse:
        digest = request_digest(request)
        try:
            content = self.fixtures[digest]
        except KeyError:
            raise FixtureMissError(
                f"fixture miss: tag={request.tag!r} digest={digest[:12]}...")
        return ChatResponse(content=content, provider_id=self.provider_id,
                            from_cache=True)


class RecordingProvider:
    """Wraps another provider and captures (digest, response) pairs."""

    def __init__(self, inner: Provider):
        self.inner = inner
        self.provider_id = inner.provider_id
        self.captured: dict[str, str] = {}
        self.log: list[tuple[str, str, str]] = []

    def complete(self, request: ChatRequest) -> ChatResponse:
        response = self.inner.complete(request)
        digest = request_digest(request)
        self.captured[digest] = response.content
        self.log.append((digest, request.tag, response.content))
        return response


def save_fixtures(provider: RecordingProvider | dict[str, str],
                  path: str | Path, tags: dict[str, str] | None = None) -> None:
    if isinstance(provider, RecordingProvider):
        items: Iterable[tuple[str, str]] = sorted(provider.captured.items())
        tags = {d: t for d, t, _ in provider.log}
    else:
        items = sorted(provider.items())
        tags = tags or {}
    with open(path, "w", encoding="utf-8") as fh:
        for digest, content in items:
            doc = {"digest": digest, "content": content}
            if digest in tags:
                doc["tag"] = tags[digest]
            fh.write(json.dumps(doc, sort_keys=True) + "\n")


def load_fixtures(path: str | Path) -> dict[str, str]:
    fixtures: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            fixtures[doc["digest"]] = doc["content"]
    return fixtures


class _TokenBucket:
    def __init__(self, rate_per_sec: float, burst: float):
        self.rate = rate_per_sec
        self.capacity = burst
        self.tokens = burst
        self.updated = time.monotonic()
        self.lock = threading.Lock()

    def acquire(self, timeout: float) -> None:
        deadline = time.monotonic() + timeout
        while True:
            with self.lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                needed = (1.0 - self.tokens) / self.rate
            if time.monotonic() + needed > deadline:
                raise RateLimitError("rate limit: no request token available in time")
            time.sleep(min(needed, 0.05))


class RemoteProvider:
    """Minimal chat-completion HTTP client.

    Sends {model, messages, temperature, max_tokens} and reads
    choices[0].message.content. Transient failures (connection errors,
    HTTP 429/5xx) are retried with exponential backoff up to max_retries.
    A token bucket plus a concurrency semaphore keep request pressure
    bounded when many pipeline workers share one provider.
    """

    provider_id = "remote"

    def __init__(self, endpoint: str, model: str,
                 api_key_env: str = "FILINGSWARM_API_KEY",
                 timeout: float = 30.0, max_retries: int = 3,
                 rate_per_sec: float = 5.0, max_concurrent: int = 4,
                 session: requests.Session | None = None):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.max_retries = max_retries
        self.session = session or requests.Session()
        self.bucket = _TokenBucket(rate_per_sec, burst=max(1.0, rate_per_sec))
        self.slots = threading.BoundedSemaphore(max_concurrent)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, request: ChatRequest) -> ChatResponse:
        payload = {
            "model": self.model,
            "messages": [{"role": "system", "content": request.system_prompt}]
                        + [{"role": role, "content": content}
                           for role, content in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        start = time.perf_counter()
        last_error: Exception | None = None
        with self.slots:
            for attempt in range(self.max_retries + 1):
                self.bucket.acquire(timeout=self.timeout)
                try:
                    resp = self.session.post(self.endpoint, json=payload,
                                             headers=self._headers(),
                                             timeout=self.timeout)
                except requests.RequestException as exc:
                    last_error = exc
                else:
                    if resp.status_code == 200:
                        try:
                            content = resp.json()["choices"][0]["message"]["content"]
                        except (ValueError, KeyError, IndexError, TypeError) as exc:
                            raise RemoteError(f"malformed completion response: {exc}")
                        return ChatResponse(content=content,
                                            provider_id=self.provider_id,
                                            latency=time.perf_counter() - start)
                    if resp.status_code not in (429,) and resp.status_code < 500:
                        raise RemoteError(f"endpoint returned HTTP {resp.status_code}")
                    last_error = RemoteError(f"transient HTTP {resp.status_code}")
                if attempt < self.max_retries:
                    time.sleep(0.5 * (2 ** attempt))
        raise RemoteError(f"remote completion failed after "
                          f"{self.max_retries + 1} attempts: {last_error}")


def classify_quality(provider: Provider, query: str) -> dict:
    """Binary screening verdict for a query: hallucinatory or not."""
    from .prompts import build_classify_request

    if not query.strip():
        raise ValueError("query must be non-empty")
    response = provider.complete(build_classify_request(query))
    parts = response.content.strip().split()
    if not parts or parts[0] not in ("hallucinatory", "non_hallucinatory"):
        raise GatewayError(f"unparseable classification: {response.content!r}")
    confidence = 0.5
    if len(parts) > 1:
        try:
            confidence = min(1.0, max(0.0, float(parts[1])))
        except ValueError:
            confidence = 0.5
    return {"label": parts[0], "confidence": confidence}
