"""Provider plumbing shared by the wire clients and the offline mocks:
configuration, retry with exponential backoff, and per-handle rate limiting.

Four capabilities are exposed behind small interfaces (image description,
speech transcription, text embedding, and text generation) so the rest of
the engine never knows which vendor or mock is answering.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass

from ..errors import (
    InvalidInputError,
    ProviderUnavailableError,
    TransientProviderError,
)

DEFAULT_AUTH_ENV = "MULTIRAG_API_KEY"


@dataclass(frozen=True)
class ProviderConfig:
    """Connection and behavior knobs for one provider handle.

    Auth tokens are read from the environment variable named by
    ``auth_token_env`` and never appear in config files or logs.
    """

    base_url: str = ""
    model_name: str = "mock"
    auth_token_env: str = DEFAULT_AUTH_ENV
    timeout: float = 30.0
    max_retries: int = 2
    backoff_base: float = 0.5
    temperature: float = 0.0
    max_tokens: int | None = None
    batch_size: int = 100
    requests_per_second: float | None = None

    def __post_init__(self):
        if self.timeout <= 0:
            raise InvalidInputError(f"timeout must be positive, got {self.timeout}")
        if self.max_retries < 0:
            raise InvalidInputError(f"max_retries must be >= 0, got {self.max_retries}")
        if self.backoff_base < 0:
            raise InvalidInputError(f"backoff_base must be >= 0, got {self.backoff_base}")
        if self.batch_size < 1:
            raise InvalidInputError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class AudioSegment:
    """One transcribed span of speech."""

    start: float
    end: float
    text: str

    def __post_init__(self):
        if not self.start < self.end:
            raise InvalidInputError(
                f"segment must have start < end, got [{self.start}, {self.end}]"
            )


@dataclass(frozen=True)
class EmbeddingVector:
    """Dense vector for one text; values are finite floats."""

    values: tuple[float, ...]

    def __post_init__(self):
        if not isinstance(self.values, tuple):
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if any(not math.isfinite(v) for v in self.values):
            raise InvalidInputError("embedding values must be finite")

    @property
    def dim(self) -> int:
        return len(self.values)


class _TokenBucket:
    """Thread-safe token bucket; blocks until a request slot is available."""

    def __init__(self, rate: float, sleep=time.sleep):
        self.rate = rate
        self.capacity = max(1.0, rate)
        self.tokens = self.capacity
        self.updated = time.monotonic()
        self._lock = threading.Lock()
        self._sleep = sleep

    def acquire(self):
        while True:
            with self._lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            self._sleep(wait)


class RetryingProvider:
    """Base class running single calls through retry/backoff and the
    optional rate limiter. Handles are immutable after construction and safe
    to share across threads."""

    def __init__(self, config: ProviderConfig, sleep=time.sleep):
        self.config = config
        self._sleep = sleep
        self._bucket = (
            _TokenBucket(config.requests_per_second, sleep)
            if config.requests_per_second
            else None
        )

    def _invoke(self, fn):
        attempts = self.config.max_retries + 1
        last: Exception | None = None
        for attempt in range(attempts):
            if self._bucket is not None:
                self._bucket.acquire()
            try:
                return fn()
            except TransientProviderError as exc:
                last = exc
                if attempt + 1 < attempts:
                    self._sleep(self.config.backoff_base * (2 ** attempt))
        raise ProviderUnavailableError(
            f"provider {self.config.model_name!r} unavailable after "
            f"{attempts} attempts: {last}"
        ) from last


class VisionProvider(RetryingProvider):
    """Image bytes + prompt -> one text description."""

    def describe_image(self, image: bytes, prompt: str) -> str:
        if not image:
            raise InvalidInputError("image bytes must be non-empty")
        if not prompt:
            raise InvalidInputError("prompt must be non-empty")
        return self._invoke(lambda: self._describe(image, prompt))

    def _describe(self, image: bytes, prompt: str) -> str:
        raise NotImplementedError


class SpeechProvider(RetryingProvider):
    """Audio bytes -> ordered transcribed segments."""

    def transcribe(self, audio: bytes) -> list[AudioSegment]:
        if not audio:
            return []
        return self._invoke(lambda: self._transcribe(audio))

    def _transcribe(self, audio: bytes) -> list[AudioSegment]:
        raise NotImplementedError


class EmbeddingProvider(RetryingProvider):
    """Texts -> one vector per text, same order, constant dimension.

    Batching into provider-limit-sized requests happens here so callers can
    hand over arbitrarily long lists.
    """

    def embed_texts(self, texts) -> list[EmbeddingVector]:
        texts = list(texts)
        if not texts or any(not t for t in texts):
            raise InvalidInputError("texts must be non-empty and contain no empty strings")
        out: list[EmbeddingVector] = []
        for i in range(0, len(texts), self.config.batch_size):
            batch = texts[i : i + self.config.batch_size]
            out.extend(self._invoke(lambda b=batch: self._embed(b)))
        return out

    def _embed(self, batch: list[str]) -> list[EmbeddingVector]:
        raise NotImplementedError


class TextProvider(RetryingProvider):
    """Prompt -> completion text."""

    def generate(self, prompt: str) -> str:
        if not prompt:
            raise InvalidInputError("prompt must be non-empty")
        return self._invoke(lambda: self._generate(prompt))

    def _generate(self, prompt: str) -> str:
        raise NotImplementedError
