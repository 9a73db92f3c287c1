"""REST service over the engine, backing the companion web UI.

Ingestion runs as background jobs on a bounded worker pool with pollable
state; answering and transcript reads are lock-free against completed
stores on disk.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from . import __version__
from .encoder import document_to_dict, format_hms, render_markdown
from .errors import EngineError, InvalidInputError, StageError
from .pipeline import Engine
from .store import KnowledgeStore

log = logging.getLogger("multirag.service")

JOB_STATES = ("queued", "sampling", "describing", "transcribing", "indexing", "done", "failed")
_STATE_INDEX = {state: index for index, state in enumerate(JOB_STATES)}
_PIPELINE_STAGES = ("sampling", "describing", "transcribing", "indexing")


@dataclass
class IngestJob:
    job_id: str
    video_id: str
    state: str = "queued"
    progress: float = 0.0
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "video_id": self.video_id,
            "state": self.state,
            "progress": self.progress,
            "error": self.error,
        }


class JobRegistry:
    """Tracks ingest jobs; transitions are forward-only, progress never drops."""

    def __init__(self, engine: Engine, workers: int = 2) -> None:
        self._engine = engine
        self._jobs: dict[str, IngestJob] = {}
        self._active_videos: set[str] = set()
        self._lock = threading.Lock()
        self._pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="ingest")

    def get(self, job_id: str) -> IngestJob | None:
        with self._lock:
            job = self._jobs.get(job_id)
            return IngestJob(**job.to_dict()) if job else None

    def _log_state(self, job: IngestJob) -> None:
        log.info(json.dumps(job.to_dict(), sort_keys=True))

    def _advance(self, job_id: str, state: str, progress: float, error: str | None = None) -> None:
        with self._lock:
            job = self._jobs[job_id]
            if job.state in ("done", "failed"):
                return
            if state != "failed" and _STATE_INDEX[state] < _STATE_INDEX[job.state]:
                return
            job.state = state
            job.progress = max(job.progress, progress)
            if error is not None:
                job.error = error
            snapshot = IngestJob(**job.to_dict())
        self._log_state(snapshot)

    def submit(self, video_id: str, frames_dir: str, audio_path: str | None) -> IngestJob:
        with self._lock:
            if video_id in self._active_videos:
                raise InvalidInputError(f"ingest already running for video {video_id!r}")
            job = IngestJob(job_id=uuid.uuid4().hex, video_id=video_id)
            self._jobs[job.job_id] = job
            self._active_videos.add(video_id)
        self._log_state(job)
        self._pool.submit(self._run, job.job_id, video_id, frames_dir, audio_path)
        return IngestJob(**job.to_dict())

    def _run(self, job_id: str, video_id: str, frames_dir: str, audio_path: str | None) -> None:
        def progress(stage: str, fraction: float) -> None:
            index = _PIPELINE_STAGES.index(stage)
            overall = (index + fraction) / len(_PIPELINE_STAGES)
            self._advance(job_id, stage, overall)

        try:
            self._engine.ingest(video_id, frames_dir, audio_path, progress=progress)
        except StageError as exc:
            self._advance(job_id, "failed", 1.0, error=str(exc))
        except Exception as exc:  # noqa: BLE001 - job boundary
            self._advance(job_id, "failed", 1.0, error=f"[internal] {exc}")
        else:
            self._advance(job_id, "done", 1.0)
        finally:
            with self._lock:
                self._active_videos.discard(video_id)

    def shutdown(self) -> None:
        self._pool.shutdown(wait=True)


class IngestRequest(BaseModel):
    frames_dir: str
    video_id: Optional[str] = None
    audio_path: Optional[str] = None


class AskRequest(BaseModel):
    question: str = ""
    k: Optional[int] = None
    prompt_type: Optional[str] = None


class _StoreCache:
    """Reload a video's store only when its manifest changes on disk."""

    def __init__(self, engine: Engine) -> None:
        self._engine = engine
        self._lock = threading.Lock()
        self._cache: dict[str, tuple[float, KnowledgeStore]] = {}

    def get(self, video_id: str) -> KnowledgeStore:
        manifest = self._engine.store_dir(video_id) / "manifest.json"
        try:
            mtime = manifest.stat().st_mtime
        except OSError:
            raise InvalidInputError(f"no store for video {video_id!r}") from None
        with self._lock:
            hit = self._cache.get(video_id)
            if hit is not None and hit[0] == mtime:
                return hit[1]
        store = KnowledgeStore.load(manifest.parent)
        with self._lock:
            self._cache[video_id] = (mtime, store)
        return store


def create_app(engine: Engine, *, workers: int = 2, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="multirag", version=__version__)
    registry = JobRegistry(engine, workers=workers)
    stores = _StoreCache(engine)
    app.state.engine = engine
    app.state.jobs = registry

    def _document(video_id: str):
        try:
            return engine.load_document(video_id)
        except InvalidInputError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.get("/health")
    def health() -> dict:
        return {
            "status": "ok",
            "version": __version__,
            "store_count": len(engine.list_videos()),
        }

    @app.post("/videos", status_code=202)
    def ingest_video(body: IngestRequest) -> dict:
        frames_dir = Path(body.frames_dir)
        if not frames_dir.is_dir():
            raise HTTPException(status_code=400, detail=f"frame directory not found: {frames_dir}")
        if body.audio_path is not None and not Path(body.audio_path).is_file():
            raise HTTPException(status_code=400, detail=f"audio file not found: {body.audio_path}")
        video_id = body.video_id or frames_dir.resolve().name
        try:
            job = registry.submit(video_id, str(frames_dir), body.audio_path)
        except InvalidInputError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {"job_id": job.job_id, "video_id": video_id}

    @app.get("/videos")
    def list_videos() -> list[dict]:
        out = []
        for video_id in engine.list_videos():
            try:
                store = stores.get(video_id)
            except EngineError:
                continue
            out.append(
                {
                    "video_id": video_id,
                    "chunk_count": len(store),
                    "created_at": store.created_at,
                }
            )
        return out

    @app.get("/videos/{video_id}/transcript")
    def transcript(video_id: str, format: str = "json"):
        doc = _document(video_id)
        if format == "markdown":
            return PlainTextResponse(render_markdown(doc))
        if format != "json":
            raise HTTPException(status_code=400, detail=f"unknown format {format!r}")
        return document_to_dict(doc)

    @app.get("/videos/{video_id}/summary")
    def summary(video_id: str) -> dict:
        doc = _document(video_id)
        return {
            "video_id": video_id,
            "rolling_summaries": [
                {
                    "start": s.start,
                    "end": s.end,
                    "label": f"[{format_hms(s.start)}]-[{format_hms(s.end)}]",
                    "text": s.text,
                }
                for s in doc.auxiliary.rolling_summaries
            ],
            "preliminary_analysis": doc.auxiliary.preliminary_analysis,
        }

    @app.post("/videos/{video_id}/ask")
    def ask(video_id: str, body: AskRequest) -> dict:
        if not body.question.strip():
            raise HTTPException(status_code=400, detail="question must be non-empty")
        if body.k is not None and body.k < 1:
            raise HTTPException(status_code=400, detail="k must be at least 1")
        if body.prompt_type is not None and body.prompt_type not in ("type1", "type2"):
            raise HTTPException(status_code=400, detail=f"unknown prompt_type {body.prompt_type!r}")
        try:
            store = stores.get(video_id)
        except InvalidInputError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        try:
            record = engine.ask(
                body.question,
                store=store,
                k=body.k,
                prompt_type=body.prompt_type,
            )
        except StageError as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        except EngineError as exc:
            raise HTTPException(status_code=500, detail=f"[ask] {exc}") from exc
        citations = []
        for hit in record.retrieved:
            chunk = store.get_chunk(hit.chunk_id)
            if chunk.time_range is not None:
                lo, hi = chunk.time_range
                header = f"[doc {chunk.doc_id} | {format_hms(lo)}–{format_hms(hi)} | {chunk.kind}]"
            else:
                header = f"[doc {chunk.doc_id} | {chunk.kind}]"
            citations.append(
                {
                    "chunk_id": hit.chunk_id,
                    "similarity": hit.similarity,
                    "rank": hit.rank,
                    "header": header,
                }
            )
        return {
            "video_id": video_id,
            "question": record.question,
            "answer": record.answer,
            "retrieved": citations,
            "prompt_type": record.prompt_type,
            "k": record.k,
            "latency_ms": record.latency_ms,
            "model_name": record.model_name,
        }

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str) -> dict:
        job = registry.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        return job.to_dict()

    resolved_ui = ui_dir if ui_dir is not None else os.environ.get("MULTIRAG_UI_DIR")
    if resolved_ui and Path(resolved_ui).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=resolved_ui, html=True), name="ui")

    return app
