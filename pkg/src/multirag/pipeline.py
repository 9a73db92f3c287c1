"""End-to-end engine: frames + audio in, populated store + answers out.

One store per video under a common root:

    <store_root>/<video_id>/<video_id>.md      rendered transcript
    <store_root>/<video_id>/<video_id>.json    transcript, lossless
    <store_root>/<video_id>/run.json           ingest run metadata
    <store_root>/<video_id>/store/             manifest.json + chunks.jsonl

All timestamps honor SOURCE_DATE_EPOCH so two runs with deterministic
providers produce bit-identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Sequence

from . import encoder, frames as frames_mod
from .agent import AnswerRecord, answer, load_template
from .assets import load_asset
from .errors import EngineError, InvalidInputError, ProviderError, StageError
from .providers.base import (
    EmbeddingProvider,
    ProviderConfig,
    SpeechProvider,
    TextProvider,
    VisionProvider,
)
from .providers.mock import (
    MOCK_EMBED_DIM,
    MockEmbeddingProvider,
    MockSpeechProvider,
    MockTextProvider,
    MockVisionProvider,
)
from .providers.openai_http import (
    HttpEmbeddingProvider,
    HttpSpeechProvider,
    HttpTextProvider,
    HttpVisionProvider,
)
from .store import KnowledgeStore, chunk_document

PROVIDER_ROLES = ("vision", "speech", "embedding", "text", "judge")

PROMPT_ASSET_NAMES = (
    "prompt_type1.txt",
    "prompt_type2.txt",
    "frame_description.txt",
    "analysis.txt",
    "judge.txt",
    "summary.txt",
)

STAGES = ("sampling", "describing", "transcribing", "indexing")


@dataclass(frozen=True)
class ProviderSpec:
    """How to build one provider: mock options or OpenAI-dialect config."""

    kind: str = "mock"
    options: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "openai"):
            raise InvalidInputError(f"unknown provider kind {self.kind!r}")


@dataclass(frozen=True)
class Providers:
    vision: VisionProvider
    speech: SpeechProvider
    embedding: EmbeddingProvider
    text: TextProvider
    judge: TextProvider

    def model_names(self) -> dict[str, str]:
        return {role: getattr(self, role).config.model_name for role in PROVIDER_ROLES}


@dataclass(frozen=True)
class EngineConfig:
    store_root: str = "stores"
    sampling_mode: str = "uniform"
    rate: float = 1.0
    decimate: bool = False
    cutoff: float = frames_mod.DEFAULT_CHANGE_CUTOFF
    chunk_size: int = 512
    overlap_ratio: float = 0.25
    default_k: int = 5
    prompt_type: str = "type2"
    decode_mode: str = "rgb"
    summary_interval: float = encoder.DEFAULT_SUMMARY_INTERVAL
    describe_concurrency: int = encoder.DEFAULT_DESCRIBE_CONCURRENCY
    max_failure_ratio: float = encoder.DEFAULT_MAX_FAILURE_RATIO
    include_audio_in_summaries: bool = True
    providers: dict[str, ProviderSpec] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.sampling_mode not in ("uniform", "change_filter"):
            raise InvalidInputError(f"unknown sampling_mode {self.sampling_mode!r}")
        if self.rate <= 0:
            raise InvalidInputError("rate must be positive")
        if self.cutoff < 0:
            raise InvalidInputError("cutoff must be non-negative")
        if self.chunk_size < 1:
            raise InvalidInputError("chunk_size must be at least 1")
        if not 0.0 <= self.overlap_ratio < 1.0:
            raise InvalidInputError("overlap_ratio must be in [0, 1)")
        if self.default_k < 1:
            raise InvalidInputError("default_k must be at least 1")
        if self.prompt_type not in ("type1", "type2"):
            raise InvalidInputError(f"unknown prompt_type {self.prompt_type!r}")
        if self.decode_mode not in ("rgb", "grayscale"):
            raise InvalidInputError(f"unknown decode_mode {self.decode_mode!r}")
        if self.summary_interval <= 0:
            raise InvalidInputError("summary_interval must be positive")
        if self.describe_concurrency < 1:
            raise InvalidInputError("describe_concurrency must be at least 1")
        if not 0.0 <= self.max_failure_ratio <= 1.0:
            raise InvalidInputError("max_failure_ratio must be in [0, 1]")
        for role in self.providers:
            if role not in PROVIDER_ROLES:
                raise InvalidInputError(f"unknown provider role {role!r}")


def _provider_config(options: Mapping[str, object], default_model: str) -> ProviderConfig:
    fields = {
        "base_url",
        "model_name",
        "auth_token_env",
        "timeout",
        "max_retries",
        "backoff_base",
        "temperature",
        "max_tokens",
        "batch_size",
        "requests_per_second",
    }
    kwargs = {k: v for k, v in options.items() if k in fields}
    kwargs.setdefault("model_name", default_model)
    return ProviderConfig(**kwargs)


def _build_one(role: str, spec: ProviderSpec):
    options = dict(spec.options)
    if spec.kind == "openai":
        config = _provider_config(options, default_model=f"openai-{role}")
        return {
            "vision": HttpVisionProvider,
            "speech": HttpSpeechProvider,
            "embedding": HttpEmbeddingProvider,
            "text": HttpTextProvider,
            "judge": HttpTextProvider,
        }[role](config)
    if role == "vision":
        return MockVisionProvider(fail_times=int(options.get("fail_times", 0)))
    if role == "speech":
        return MockSpeechProvider(
            segments=options.get("segments", ()),
            fail_times=int(options.get("fail_times", 0)),
        )
    if role == "embedding":
        return MockEmbeddingProvider(
            dim=int(options.get("dim", MOCK_EMBED_DIM)),
            fail_times=int(options.get("fail_times", 0)),
        )
    return MockTextProvider(
        mode=options.get("mode", "fixed"),
        reply=options.get("reply", "Mock response."),
        replies=options.get("replies", ()),
        fail_times=int(options.get("fail_times", 0)),
    )


def build_providers(config: EngineConfig) -> Providers:
    specs = {role: config.providers.get(role, ProviderSpec()) for role in PROVIDER_ROLES}
    return Providers(**{role: _build_one(role, specs[role]) for role in PROVIDER_ROLES})


def engine_timestamp() -> str:
    """UTC second-resolution timestamp; SOURCE_DATE_EPOCH pins it."""
    raw = os.environ.get("SOURCE_DATE_EPOCH")
    seconds = int(raw) if raw else int(time.time())
    return datetime.fromtimestamp(seconds, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def config_digest(config: EngineConfig, providers: Providers) -> str:
    """Digest of everything that shapes artifact content.

    Covers sampling, chunking, prompt selection, model names, and the full
    prompt texts; excludes paths, concurrency, and retry tuning, which
    cannot change what gets produced.
    """
    payload = {
        "sampling_mode": config.sampling_mode,
        "rate": config.rate,
        "decimate": config.decimate,
        "cutoff": config.cutoff,
        "chunk_size": config.chunk_size,
        "overlap_ratio": config.overlap_ratio,
        "default_k": config.default_k,
        "prompt_type": config.prompt_type,
        "decode_mode": config.decode_mode,
        "summary_interval": config.summary_interval,
        "include_audio_in_summaries": config.include_audio_in_summaries,
        "models": providers.model_names(),
        "prompts": {name: load_asset(name) for name in PROMPT_ASSET_NAMES},
    }
    canon = json.dumps(payload, ensure_ascii=False, sort_keys=True)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass
class IngestResult:
    video_id: str
    document: encoder.TranscriptDocument
    store: KnowledgeStore
    video_dir: Path
    store_dir: Path
    metadata: dict


ProgressFn = Callable[[str, float], None]


def _no_progress(stage: str, fraction: float) -> None:
    del stage, fraction


class Engine:
    """Shared ingestion/answering core behind the CLI and the service."""

    def __init__(self, config: EngineConfig, providers: Providers | None = None) -> None:
        self.config = config
        self.providers = providers if providers is not None else build_providers(config)
        self.digest = config_digest(config, self.providers)

    @property
    def store_root(self) -> Path:
        return Path(self.config.store_root)

    def video_dir(self, video_id: str) -> Path:
        return self.store_root / video_id

    def store_dir(self, video_id: str) -> Path:
        return self.video_dir(video_id) / "store"

    def has_store(self, video_id: str) -> bool:
        return (self.store_dir(video_id) / "manifest.json").is_file()

    def list_videos(self) -> list[str]:
        if not self.store_root.is_dir():
            return []
        return sorted(p.name for p in self.store_root.iterdir() if self.has_store(p.name))

    def load_store(self, video_id: str) -> KnowledgeStore:
        if not self.has_store(video_id):
            raise InvalidInputError(f"no store for video {video_id!r} under {self.store_root}")
        return KnowledgeStore.load(self.store_dir(video_id))

    def load_document(self, video_id: str) -> encoder.TranscriptDocument:
        path = self.video_dir(video_id) / f"{video_id}.json"
        if not path.is_file():
            raise InvalidInputError(f"no transcript for video {video_id!r} under {self.store_root}")
        return encoder.load_document_json(path.read_text(encoding="utf-8"))

    # Ingestion

    def sample(self, video_id: str, frames_dir: str | Path) -> tuple[frames_mod.SampledFrameSet, dict]:
        loaded = frames_mod.load_frame_dir(frames_dir, decode_mode=self.config.decode_mode)
        sampled = frames_mod.uniform_sample(loaded, self.config.rate, video_id=video_id)
        steps = ["uniform"]
        if self.config.decimate:
            sampled = frames_mod.decimate_alternate(sampled)
            steps.append("decimate_alternate")
        if self.config.sampling_mode == "change_filter":
            sampled = frames_mod.change_filter(
                sampled.frames,
                frames_mod.ChangeFilterConfig(cutoff=self.config.cutoff),
                video_id=video_id,
            )
            steps.append("change_filter")
        info = {
            "mode": self.config.sampling_mode,
            "rate": self.config.rate,
            "decimate": self.config.decimate,
            "cutoff": self.config.cutoff,
            "order": "->".join(steps),
            "frames_loaded": len(loaded),
            "frames_kept": len(sampled),
            "effective_rate": sampled.effective_rate,
        }
        return sampled, info

    def ingest(
        self,
        video_id: str,
        frames_dir: str | Path,
        audio_path: str | Path | None = None,
        *,
        exclude_kinds: Sequence[str] = (),
        progress: ProgressFn = _no_progress,
        persist: bool = True,
    ) -> IngestResult:
        """Run the full pipeline for one video; stages report progress."""
        if not video_id or "/" in video_id or video_id != video_id.strip():
            raise InvalidInputError(f"unusable video_id {video_id!r}")
        created_at = engine_timestamp()

        progress("sampling", 0.0)
        try:
            sampled, sampling_info = self.sample(video_id, frames_dir)
        except StageError:
            raise
        except (EngineError, OSError) as exc:
            raise StageError("sampling", str(exc)) from exc
        progress("sampling", 1.0)

        progress("describing", 0.0)
        try:
            descriptions = encoder.describe_frames(
                sampled,
                self.providers.vision,
                concurrency=self.config.describe_concurrency,
                max_failure_ratio=self.config.max_failure_ratio,
            )
        except StageError:
            raise
        except EngineError as exc:
            raise StageError("describing", str(exc)) from exc
        # Keep only the file name in durable artifacts; the directory part
        # is machine-specific and would break cross-run byte identity.
        descriptions = [
            replace(d, frame_source=Path(d.frame_source).name if d.frame_source else None)
            for d in descriptions
        ]
        progress("describing", 1.0)

        progress("transcribing", 0.0)
        segments = []
        if audio_path is not None:
            try:
                segments = encoder.transcribe_audio(audio_path, self.providers.speech)
            except (EngineError, OSError) as exc:
                raise StageError("transcribing", str(exc)) from exc
        progress("transcribing", 1.0)

        progress("indexing", 0.0)
        try:
            entries = encoder.align(descriptions, segments)
            flags = []
            failed = sum(1 for d in descriptions if d.error is not None)
            if failed:
                flags.append(f"frame_failures:{failed}")
            auxiliary = encoder.AuxiliaryMetadata()
            if entries:
                summaries = encoder.summarize(
                    entries,
                    self.providers.text,
                    interval=self.config.summary_interval,
                    include_audio=self.config.include_audio_in_summaries,
                )
                unsummarized = sum(1 for s in summaries if not s.text)
                if unsummarized:
                    flags.append(f"unsummarized_windows:{unsummarized}")
                try:
                    analysis = encoder.analyze(
                        entries,
                        self.providers.text,
                        include_audio=self.config.include_audio_in_summaries,
                    )
                except ProviderError:
                    analysis = ""
                    flags.append("analysis_failed")
                auxiliary = encoder.AuxiliaryMetadata(tuple(summaries), analysis)
            document = encoder.TranscriptDocument(
                video_id=video_id,
                entries=tuple(entries),
                auxiliary=auxiliary,
                created_at=created_at,
                pipeline_config_digest=self.digest,
                flags=tuple(flags),
            )
            store = self.build_store(document, exclude_kinds=exclude_kinds, created_at=created_at)
        except StageError:
            raise
        except EngineError as exc:
            raise StageError("indexing", str(exc)) from exc

        metadata = {
            "video_id": video_id,
            "created_at": created_at,
            "config_digest": self.digest,
            "models": self.providers.model_names(),
            "sampling": sampling_info,
            "chunking": {
                "chunk_size": self.config.chunk_size,
                "overlap_ratio": self.config.overlap_ratio,
                "excluded_kinds": sorted(exclude_kinds),
            },
            "chunk_count": len(store),
            "entry_count": len(document.entries),
            "audio": audio_path is not None,
        }

        video_dir = self.video_dir(video_id)
        store_dir = self.store_dir(video_id)
        if persist:
            try:
                video_dir.mkdir(parents=True, exist_ok=True)
                (video_dir / f"{video_id}.md").write_text(
                    encoder.render_markdown(document), encoding="utf-8"
                )
                (video_dir / f"{video_id}.json").write_text(
                    encoder.dump_document_json(document), encoding="utf-8"
                )
                (video_dir / "run.json").write_text(
                    json.dumps(metadata, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8",
                )
                store.persist(store_dir)
            except OSError as exc:
                raise StageError("indexing", str(exc)) from exc
        progress("indexing", 1.0)
        return IngestResult(video_id, document, store, video_dir, store_dir, metadata)

    def build_store(
        self,
        document: encoder.TranscriptDocument,
        *,
        exclude_kinds: Sequence[str] = (),
        created_at: str | None = None,
    ) -> KnowledgeStore:
        """Chunk and embed one document into a fresh in-memory store."""
        chunks = chunk_document(
            document,
            size=self.config.chunk_size,
            overlap_ratio=self.config.overlap_ratio,
            exclude_kinds=exclude_kinds,
        )
        store = KnowledgeStore(
            model_name=self.providers.embedding.config.model_name,
            chunk_size=self.config.chunk_size,
            overlap_ratio=self.config.overlap_ratio,
            created_at=created_at if created_at is not None else engine_timestamp(),
        )
        if chunks:
            vectors = self.providers.embedding.embed_texts([c.text for c in chunks])
            store.upsert(list(zip(chunks, vectors)))
        return store

    def rebuild_store(
        self,
        video_id: str,
        *,
        exclude_kinds: Sequence[str] = (),
        out_dir: str | Path | None = None,
    ) -> KnowledgeStore:
        """Re-chunk a saved transcript with kind filters, no re-describing.

        The rebuilt store inherits the original store's created_at, so a
        rebuild with no exclusions persists byte-identically.
        """
        document = self.load_document(video_id)
        original = KnowledgeStore.load(self.store_dir(video_id))
        store = self.build_store(
            document, exclude_kinds=exclude_kinds, created_at=original.created_at
        )
        if out_dir is not None:
            store.persist(out_dir)
        return store

    # Answering

    def ask(
        self,
        question: str,
        video_id: str | None = None,
        *,
        store: KnowledgeStore | None = None,
        k: int | None = None,
        prompt_type: str | None = None,
    ) -> AnswerRecord:
        if store is None:
            if video_id is None:
                raise InvalidInputError("ask needs a video_id or an explicit store")
            store = self.load_store(video_id)
        template = load_template(prompt_type or self.config.prompt_type)
        return answer(
            question,
            store,
            embedder=self.providers.embedding,
            generator=self.providers.text,
            k=k if k is not None else self.config.default_k,
            template=template,
        )

    def calibrate(self, frames_dir: str | Path, bins: int = 10) -> dict:
        """Consecutive-frame MSE statistics to help pick a cutoff."""
        loaded = frames_mod.load_frame_dir(frames_dir, decode_mode=self.config.decode_mode)
        sampled = frames_mod.uniform_sample(loaded, self.config.rate)
        report = frames_mod.mse_histogram(sampled.frames, bins=bins)
        report["rate"] = self.config.rate
        report["frames_considered"] = len(sampled)
        return report

    def run_metadata(self, **extra: object) -> dict:
        base = {
            "config_digest": self.digest,
            "models": self.providers.model_names(),
            "rate": self.config.rate,
            "sampling_mode": self.config.sampling_mode,
            "chunk_size": self.config.chunk_size,
            "overlap_ratio": self.config.overlap_ratio,
            "prompt_type": self.config.prompt_type,
        }
        base.update(extra)
        return base
