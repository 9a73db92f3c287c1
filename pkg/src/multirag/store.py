"""Chunk documents, index embeddings, and serve exact top-k retrieval.

Documents are split per kind (frame descriptions, audio, summaries,
analysis) into fixed-size overlapping token windows.  Retrieval is exact
brute-force cosine over every stored vector; at hundreds of chunks per
video that is cheap and keeps ranking literally checkable.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .encoder import TranscriptDocument, format_hms
from .errors import IntegrityError, InvalidInputError
from .providers.base import EmbeddingVector

DEFAULT_CHUNK_SIZE = 512
DEFAULT_OVERLAP_RATIO = 0.25

CHUNK_KINDS = ("frame_description", "audio", "summary", "analysis")

MANIFEST_NAME = "manifest.json"
CHUNKS_NAME = "chunks.jsonl"


def tokenize(text: str) -> list[str]:
    """Split on runs of Unicode whitespace; punctuation stays attached."""
    return text.split()


def detokenize(tokens: Sequence[str]) -> str:
    return " ".join(tokens)


def chunk_spans(token_count: int, size: int, overlap_ratio: float) -> list[tuple[int, int]]:
    """Token spans at multiples of the stride, stopping once the end is covered."""
    if size < 1:
        raise InvalidInputError("chunk size must be at least 1")
    if not 0.0 <= overlap_ratio < 1.0:
        raise InvalidInputError("overlap_ratio must be in [0, 1)")
    if token_count < 0:
        raise InvalidInputError("token_count must be non-negative")
    if token_count == 0:
        return []
    stride = max(1, math.floor(size * (1.0 - overlap_ratio)))
    spans = []
    start = 0
    while True:
        end = min(start + size, token_count)
        spans.append((start, end))
        if end == token_count:
            return spans
        start += stride


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    text: str
    token_span: tuple[int, int]
    kind: str
    time_range: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if not self.chunk_id:
            raise InvalidInputError("chunk_id must be non-empty")
        start, end = self.token_span
        if end <= start:
            raise InvalidInputError("token_span must be non-empty")
        object.__setattr__(self, "token_span", (int(start), int(end)))
        if self.kind not in CHUNK_KINDS:
            raise InvalidInputError(f"unknown chunk kind {self.kind!r}")
        if self.time_range is not None:
            lo, hi = self.time_range
            if hi < lo:
                raise InvalidInputError("time_range must not end before it starts")
            object.__setattr__(self, "time_range", (float(lo), float(hi)))


@dataclass(frozen=True)
class EmbeddingRecord:
    chunk_id: str
    vector: EmbeddingVector


@dataclass(frozen=True)
class RetrievalHit:
    chunk_id: str
    similarity: float
    rank: int


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Plain sequential cosine; zero-norm vectors score 0.0 by decision."""
    if a.dim != b.dim:
        raise InvalidInputError(f"dim mismatch: {a.dim} vs {b.dim}")
    dot = 0.0
    na = 0.0
    nb = 0.0
    for x, y in zip(a.values, b.values):
        dot += x * y
        na += x * x
        nb += y * y
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / math.sqrt(na * nb)


def _entry_intervals(doc: TranscriptDocument) -> list[tuple[float, float]]:
    stamps = [e.timestamp for e in doc.entries]
    out = []
    for i, ts in enumerate(stamps):
        hi = stamps[i + 1] if i + 1 < len(stamps) else ts
        out.append((ts, hi))
    return out


def chunk_document(
    doc: TranscriptDocument,
    *,
    size: int = DEFAULT_CHUNK_SIZE,
    overlap_ratio: float = DEFAULT_OVERLAP_RATIO,
    exclude_kinds: Iterable[str] = (),
) -> list[Chunk]:
    """Chunk one document into per-kind token streams.

    Every timed piece of text enters its stream prefixed by a `[HH:MM:SS]`
    marker token; each chunk's time_range is the union of the source time
    windows its tokens came from.  Kinds in `exclude_kinds` are skipped
    entirely, which is how ablations drop audio or auxiliary metadata.
    """
    excluded = set(exclude_kinds)
    unknown = excluded - set(CHUNK_KINDS)
    if unknown:
        raise InvalidInputError(f"unknown chunk kinds: {sorted(unknown)}")

    streams: dict[str, tuple[list[str], list[tuple[float, float] | None]]] = {
        kind: ([], []) for kind in CHUNK_KINDS
    }

    def feed(kind: str, text: str, interval: tuple[float, float] | None, marker: str | None) -> None:
        tokens, tags = streams[kind]
        if marker is not None:
            tokens.append(marker)
            tags.append(interval)
        for token in tokenize(text):
            tokens.append(token)
            tags.append(interval)

    intervals = _entry_intervals(doc)
    for entry, interval in zip(doc.entries, intervals):
        marker = f"[{format_hms(entry.timestamp)}]"
        feed("frame_description", entry.frame_description, interval, marker)
        if entry.audio_text:
            feed("audio", entry.audio_text, interval, marker)
    for summary in doc.auxiliary.rolling_summaries:
        if summary.text:
            marker = f"[{format_hms(summary.start)}]"
            feed("summary", summary.text, (summary.start, summary.end), marker)
    if doc.auxiliary.preliminary_analysis:
        feed("analysis", doc.auxiliary.preliminary_analysis, None, None)

    chunks: list[Chunk] = []
    for kind in CHUNK_KINDS:
        if kind in excluded:
            continue
        tokens, tags = streams[kind]
        for index, (start, end) in enumerate(chunk_spans(len(tokens), size, overlap_ratio)):
            tagged = [t for t in tags[start:end] if t is not None]
            time_range = (
                (min(t[0] for t in tagged), max(t[1] for t in tagged)) if tagged else None
            )
            chunks.append(
                Chunk(
                    chunk_id=f"{doc.video_id}:{kind}:{index:04d}",
                    doc_id=doc.video_id,
                    text=detokenize(tokens[start:end]),
                    token_span=(start, end),
                    kind=kind,
                    time_range=time_range,
                )
            )
    return chunks


class KnowledgeStore:
    """In-memory chunk + vector index with exclusive-writer locking."""

    def __init__(
        self,
        dim: int | None = None,
        *,
        model_name: str = "mock",
        chunk_size: int = DEFAULT_CHUNK_SIZE,
        overlap_ratio: float = DEFAULT_OVERLAP_RATIO,
        created_at: str = "",
    ) -> None:
        if dim is not None and dim < 1:
            raise InvalidInputError("embedding dim must be at least 1")
        self.dim = dim
        self.model_name = model_name
        self.chunk_size = chunk_size
        self.overlap_ratio = overlap_ratio
        self.created_at = created_at
        self._chunks: dict[str, Chunk] = {}
        self._vectors: dict[str, tuple[float, ...]] = {}
        self._lock = threading.RLock()
        self._cache: tuple[list[str], np.ndarray, np.ndarray] | None = None

    def __len__(self) -> int:
        with self._lock:
            return len(self._chunks)

    @property
    def chunk_count(self) -> int:
        return len(self)

    def upsert(self, items: Iterable[tuple[Chunk, EmbeddingVector]]) -> None:
        """Insert or replace chunks; all-or-nothing under the writer lock."""
        batch = list(items)
        if not batch:
            return
        with self._lock:
            expected = self.dim if self.dim is not None else batch[0][1].dim
            seen: set[str] = set()
            for chunk, vector in batch:
                if chunk.chunk_id in seen:
                    raise InvalidInputError(f"duplicate chunk_id in batch: {chunk.chunk_id}")
                seen.add(chunk.chunk_id)
                if vector.dim != expected:
                    raise InvalidInputError(
                        f"vector dim mismatch for {chunk.chunk_id}: "
                        f"expected {expected}, got {vector.dim}"
                    )
            self.dim = expected
            for chunk, vector in batch:
                self._chunks[chunk.chunk_id] = chunk
                self._vectors[chunk.chunk_id] = tuple(vector.values)
            self._cache = None

    def get_chunk(self, chunk_id: str) -> Chunk:
        with self._lock:
            try:
                return self._chunks[chunk_id]
            except KeyError:
                raise IntegrityError(f"unknown chunk_id {chunk_id!r}") from None

    def chunks(self) -> list[Chunk]:
        with self._lock:
            return [self._chunks[cid] for cid in sorted(self._chunks)]

    def records(self) -> list[EmbeddingRecord]:
        with self._lock:
            return [
                EmbeddingRecord(cid, EmbeddingVector(self._vectors[cid]))
                for cid in sorted(self._vectors)
            ]

    def _matrix(self) -> tuple[list[str], np.ndarray, np.ndarray]:
        if self._cache is None:
            ids = sorted(self._vectors)
            mat = np.array([self._vectors[cid] for cid in ids], dtype=np.float64)
            mat = np.ascontiguousarray(mat.reshape(len(ids), self.dim or 0))
            norms = np.sqrt(np.einsum("ij,ij->i", mat, mat)) if len(ids) else np.zeros(0)
            self._cache = (ids, mat, np.ascontiguousarray(norms, dtype=np.float64))
        return self._cache

    def query(self, q: EmbeddingVector, k: int) -> list[RetrievalHit]:
        """Exact top-k: brute-force cosine, sort, tie-break on chunk_id."""
        if k < 1:
            raise InvalidInputError("k must be at least 1")
        with self._lock:
            if not self._vectors:
                return []
            if q.dim != self.dim:
                raise InvalidInputError(f"query dim mismatch: expected {self.dim}, got {q.dim}")
            ids, mat, norms = self._matrix()
            qvec = np.ascontiguousarray(q.values, dtype=np.float64)
            scores = kernels.cosine_scores(mat, norms, qvec)
        order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))[:k]
        return [
            RetrievalHit(ids[i], float(scores[i]), rank)
            for rank, i in enumerate(order, start=1)
        ]

    # Persistence: manifest.json with a checksum over chunks.jsonl, one
    # chunk + vector per line sorted by chunk_id, floats at full precision.

    def persist(self, path: str | Path) -> None:
        directory = Path(path)
        directory.mkdir(parents=True, exist_ok=True)
        with self._lock:
            ids = sorted(self._chunks)
            lines = []
            for cid in ids:
                chunk = self._chunks[cid]
                lines.append(
                    json.dumps(
                        {
                            "chunk_id": chunk.chunk_id,
                            "doc_id": chunk.doc_id,
                            "text": chunk.text,
                            "token_span": list(chunk.token_span),
                            "kind": chunk.kind,
                            "time_range": (
                                list(chunk.time_range) if chunk.time_range is not None else None
                            ),
                            "vector": list(self._vectors[cid]),
                        },
                        ensure_ascii=False,
                        sort_keys=True,
                    )
                )
            blob = "".join(line + "\n" for line in lines).encode("utf-8")
            manifest = {
                "dim": self.dim,
                "chunk_count": len(ids),
                "model_name": self.model_name,
                "chunk_size": self.chunk_size,
                "overlap_ratio": self.overlap_ratio,
                "created_at": self.created_at,
                "checksum": hashlib.sha256(blob).hexdigest(),
            }
        (directory / CHUNKS_NAME).write_bytes(blob)
        (directory / MANIFEST_NAME).write_text(
            json.dumps(manifest, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "KnowledgeStore":
        directory = Path(path)
        manifest_path = directory / MANIFEST_NAME
        chunks_path = directory / CHUNKS_NAME
        if not manifest_path.is_file() or not chunks_path.is_file():
            raise IntegrityError(f"store at {directory} is missing {MANIFEST_NAME} or {CHUNKS_NAME}")
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise IntegrityError(f"corrupt manifest in {directory}: {exc}") from exc
        blob = chunks_path.read_bytes()
        checksum = hashlib.sha256(blob).hexdigest()
        if checksum != manifest.get("checksum"):
            raise IntegrityError(
                f"store at {directory} failed its checksum: manifest says "
                f"{manifest.get('checksum')!r}, file hashes to {checksum!r}"
            )
        store = cls(
            manifest.get("dim"),
            model_name=manifest.get("model_name", ""),
            chunk_size=manifest.get("chunk_size", DEFAULT_CHUNK_SIZE),
            overlap_ratio=manifest.get("overlap_ratio", DEFAULT_OVERLAP_RATIO),
            created_at=manifest.get("created_at", ""),
        )
        items: list[tuple[Chunk, EmbeddingVector]] = []
        for number, raw in enumerate(blob.decode("utf-8").splitlines(), start=1):
            try:
                record = json.loads(raw)
                chunk = Chunk(
                    chunk_id=record["chunk_id"],
                    doc_id=record["doc_id"],
                    text=record["text"],
                    token_span=tuple(record["token_span"]),
                    kind=record["kind"],
                    time_range=(
                        tuple(record["time_range"]) if record["time_range"] is not None else None
                    ),
                )
                vector = EmbeddingVector(tuple(record["vector"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise IntegrityError(f"corrupt chunk record at line {number}: {exc}") from exc
            items.append((chunk, vector))
        if len(items) != manifest.get("chunk_count"):
            raise IntegrityError(
                f"store at {directory} holds {len(items)} records but the manifest "
                f"says {manifest.get('chunk_count')}"
            )
        store.upsert(items)
        return store
