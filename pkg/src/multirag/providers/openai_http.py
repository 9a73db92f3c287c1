"""OpenAI-compatible wire clients for the four capabilities.

One JSON dialect covers everything: chat completions (with image content
parts for vision), the audio transcription endpoint, and the embeddings
endpoint. Transient failures (HTTP 429/5xx, timeouts) are retried with
exponential backoff; requests and responses are logged as JSON lines with
auth redacted.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import time

import httpx

from ..errors import ProtocolError, ProviderError, TransientProviderError
from .base import (
    AudioSegment,
    EmbeddingProvider,
    EmbeddingVector,
    ProviderConfig,
    SpeechProvider,
    TextProvider,
    VisionProvider,
)

wire_log = logging.getLogger("multirag.providers.wire")


def _image_mime(data: bytes) -> str:
    return "image/png" if data[:8] == b"\x89PNG\r\n\x1a\n" else "image/jpeg"


class _HttpClientMixin:
    """HTTP POST with retry classification and redacted wire logging."""

    def _init_http(self, config: ProviderConfig, transport=None):
        token = os.environ.get(config.auth_token_env, "")
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        self._client = httpx.Client(
            base_url=config.base_url,
            timeout=config.timeout,
            headers=headers,
            transport=transport,
        )

    def _post(self, path: str, *, json_body=None, data=None, files=None) -> dict:
        started = time.monotonic()
        try:
            resp = self._client.post(path, json=json_body, data=data, files=files)
        except httpx.HTTPError as exc:
            self._log_wire(path, None, started, error=type(exc).__name__)
            raise TransientProviderError(f"{type(exc).__name__} calling {path}: {exc}") from exc
        self._log_wire(path, resp, started)
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientProviderError(f"HTTP {resp.status_code} from {path}")
        if resp.status_code >= 400:
            raise ProviderError(
                f"HTTP {resp.status_code} from {path}: {resp.text[:200]}"
            )
        try:
            return resp.json()
        except ValueError as exc:
            raise ProtocolError(
                f"non-JSON response from {path}: {resp.text[:200]!r}"
            ) from exc

    def _log_wire(self, path, resp, started, error=None):
        if not wire_log.isEnabledFor(logging.INFO):
            return
        record = {
            "model": self.config.model_name,
            "path": path,
            "elapsed_ms": round((time.monotonic() - started) * 1000, 3),
        }
        if resp is not None:
            record["status"] = resp.status_code
            record["response_bytes"] = len(resp.content)
        if error:
            record["error"] = error
        wire_log.info(json.dumps(record, sort_keys=True))


def _extract_message(payload: dict, path: str) -> str:
    try:
        content = payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ProtocolError(
            f"unexpected completion shape from {path}: {json.dumps(payload)[:200]}"
        ) from exc
    if not isinstance(content, str):
        raise ProtocolError(f"completion content is not text: {content!r}")
    return content


class HttpVisionProvider(_HttpClientMixin, VisionProvider):
    def __init__(self, config: ProviderConfig, transport=None, sleep=time.sleep):
        super().__init__(config, sleep)
        self._init_http(config, transport)

    def _describe(self, image: bytes, prompt: str) -> str:
        data_uri = (
            f"data:{_image_mime(image)};base64,"
            + base64.b64encode(image).decode("ascii")
        )
        payload = self._post(
            "/chat/completions",
            json_body={
                "model": self.config.model_name,
                "temperature": self.config.temperature,
                "messages": [
                    {
                        "role": "user",
                        "content": [
                            {"type": "text", "text": prompt},
                            {"type": "image_url", "image_url": {"url": data_uri}},
                        ],
                    }
                ],
            },
        )
        return _extract_message(payload, "/chat/completions")


class HttpSpeechProvider(_HttpClientMixin, SpeechProvider):
    def __init__(self, config: ProviderConfig, transport=None, sleep=time.sleep):
        super().__init__(config, sleep)
        self._init_http(config, transport)

    def _transcribe(self, audio: bytes) -> list[AudioSegment]:
        payload = self._post(
            "/audio/transcriptions",
            data={
                "model": self.config.model_name,
                "response_format": "verbose_json",
            },
            files={"file": ("audio", audio)},
        )
        segments = payload.get("segments")
        if segments is None:
            raise ProtocolError(
                "transcription response lacks 'segments': "
                + json.dumps(payload)[:200]
            )
        try:
            return [
                AudioSegment(float(s["start"]), float(s["end"]), str(s["text"]))
                for s in segments
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed transcription segment: {exc}") from exc


class HttpEmbeddingProvider(_HttpClientMixin, EmbeddingProvider):
    def __init__(self, config: ProviderConfig, transport=None, sleep=time.sleep):
        super().__init__(config, sleep)
        self._init_http(config, transport)

    def _embed(self, batch: list[str]) -> list[EmbeddingVector]:
        payload = self._post(
            "/embeddings",
            json_body={"model": self.config.model_name, "input": batch},
        )
        rows = payload.get("data")
        if not isinstance(rows, list) or len(rows) != len(batch):
            raise ProtocolError(
                f"embeddings response has {len(rows) if isinstance(rows, list) else '?'} "
                f"rows for {len(batch)} inputs"
            )
        try:
            ordered = sorted(rows, key=lambda r: r["index"])
            vectors = [
                EmbeddingVector(tuple(float(v) for v in r["embedding"]))
                for r in ordered
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed embedding row: {exc}") from exc
        dims = {v.dim for v in vectors}
        if len(dims) > 1:
            raise ProtocolError(f"inconsistent embedding dims in one batch: {sorted(dims)}")
        return vectors


class HttpTextProvider(_HttpClientMixin, TextProvider):
    def __init__(self, config: ProviderConfig, transport=None, sleep=time.sleep):
        super().__init__(config, sleep)
        self._init_http(config, transport)

    def _generate(self, prompt: str) -> str:
        body = {
            "model": self.config.model_name,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        if self.config.max_tokens is not None:
            body["max_tokens"] = self.config.max_tokens
        payload = self._post("/chat/completions", json_body=body)
        return _extract_message(payload, "/chat/completions")
