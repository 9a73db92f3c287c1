"""Deterministic offline providers.

Every mock is a pure function of its inputs and configuration: outputs are
bit-identical across runs and platforms, which is what makes the full
pipeline reproducible without network access. Failure injection
(``fail_times``) is the one piece of mutable state, used to exercise the
retry path.
"""

from __future__ import annotations

import hashlib
import io

from PIL import Image, UnidentifiedImageError

from ..errors import TransientProviderError
from .base import (
    AudioSegment,
    EmbeddingProvider,
    EmbeddingVector,
    ProviderConfig,
    SpeechProvider,
    TextProvider,
    VisionProvider,
)

MOCK_EMBED_DIM = 32


def _mock_config(**overrides) -> ProviderConfig:
    overrides.setdefault("backoff_base", 0.0)
    return ProviderConfig(**overrides)


class _FailureMixin:
    """First ``fail_times`` raw calls raise a transient error; with
    ``fail_times=-1`` every call fails. ``attempts`` counts raw calls."""

    def _init_failures(self, fail_times: int):
        self.fail_times = fail_times
        self.attempts = 0

    def _maybe_fail(self):
        self.attempts += 1
        if self.fail_times < 0 or self.attempts <= self.fail_times:
            raise TransientProviderError(
                f"injected failure on attempt {self.attempts}"
            )


class MockVisionProvider(_FailureMixin, VisionProvider):
    """Describes an image as ``frame:`` + the first 8 hex chars of the
    SHA-256 of its decoded pixel bytes.

    Digesting decoded pixels (canonical RGB) rather than the encoded file
    keeps descriptions independent of which encoder produced the bytes.
    """

    def __init__(self, config: ProviderConfig | None = None, fail_times: int = 0):
        super().__init__(config or _mock_config(model_name="mock-vision"))
        self._init_failures(fail_times)

    def _describe(self, image: bytes, prompt: str) -> str:
        self._maybe_fail()
        try:
            with Image.open(io.BytesIO(image)) as im:
                payload = im.convert("RGB").tobytes()
        except (UnidentifiedImageError, OSError):
            payload = image
        return "frame:" + hashlib.sha256(payload).hexdigest()[:8]


class MockSpeechProvider(_FailureMixin, SpeechProvider):
    """Returns a fixed segment list for any non-empty audio."""

    def __init__(
        self,
        segments=(),
        config: ProviderConfig | None = None,
        fail_times: int = 0,
    ):
        super().__init__(config or _mock_config(model_name="mock-asr"))
        self.segments = [
            s if isinstance(s, AudioSegment) else AudioSegment(*s) for s in segments
        ]
        self._init_failures(fail_times)

    def _transcribe(self, audio: bytes) -> list[AudioSegment]:
        self._maybe_fail()
        return list(self.segments)


class MockEmbeddingProvider(_FailureMixin, EmbeddingProvider):
    """Unit-norm vector derived from the SHA-512 of the text.

    64 digest bytes become ``dim`` (default 32) centered values which are
    then normalized, so identical texts collide exactly and distinct texts
    land in general position.
    """

    def __init__(
        self,
        dim: int = MOCK_EMBED_DIM,
        config: ProviderConfig | None = None,
        fail_times: int = 0,
    ):
        super().__init__(config or _mock_config(model_name="mock-embed"))
        self.dim = dim
        self._init_failures(fail_times)

    def _embed(self, batch: list[str]) -> list[EmbeddingVector]:
        self._maybe_fail()
        return [self._vector(text) for text in batch]

    def _vector(self, text: str) -> EmbeddingVector:
        digest = b""
        while len(digest) < 2 * self.dim:
            digest += hashlib.sha512(
                text.encode("utf-8") + len(digest).to_bytes(4, "big")
            ).digest()
        raw = [
            int.from_bytes(digest[2 * i : 2 * i + 2], "big") - 32767.5
            for i in range(self.dim)
        ]
        norm = sum(v * v for v in raw) ** 0.5
        return EmbeddingVector(tuple(v / norm for v in raw))


class MockTextProvider(_FailureMixin, TextProvider):
    """Deterministic completions for the generation and judging paths.

    Modes:
      fixed        - always return ``reply``
      script       - return ``replies`` in order, repeating the last one
      echo_prompt  - return the full prompt
      echo_question / echo_context - return the slot contents of a filled
                     QA prompt template
    """

    def __init__(
        self,
        mode: str = "fixed",
        reply: str = "",
        replies=(),
        config: ProviderConfig | None = None,
        fail_times: int = 0,
    ):
        super().__init__(config or _mock_config(model_name="mock-llm"))
        if mode not in ("fixed", "script", "echo_prompt", "echo_question", "echo_context"):
            raise ValueError(f"unknown mock mode: {mode!r}")
        self.mode = mode
        self.reply = reply
        self.replies = list(replies)
        self._cursor = 0
        self._init_failures(fail_times)

    def _generate(self, prompt: str) -> str:
        self._maybe_fail()
        if self.mode == "fixed":
            return self.reply
        if self.mode == "script":
            reply = self.replies[min(self._cursor, len(self.replies) - 1)]
            self._cursor += 1
            return reply
        if self.mode == "echo_prompt":
            return prompt
        if self.mode == "echo_question":
            return _between(prompt, "User's Question:\n", "\nResponse:")
        return _between(prompt, "Context from Previous Conversation:\n", "\nUser's Question:")


def _between(text: str, start: str, end: str) -> str:
    i = text.find(start)
    j = text.rfind(end)
    if i < 0 or j < 0 or j < i:
        return text
    return text[i + len(start) : j]
