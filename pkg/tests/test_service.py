from __future__ import annotations

import json
import logging
import threading
import time

import pytest
from conftest import make_engine
from fastapi.testclient import TestClient

from multirag import __version__
from multirag.encoder import render_markdown
from multirag.pipeline import ProviderSpec
from multirag.service import JOB_STATES, create_app


@pytest.fixture
def client(engine):
    with TestClient(create_app(engine, workers=1)) as c:
        yield c


def wait_for_job(client, job_id, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        job = client.get(f"/jobs/{job_id}").json()
        if job["state"] in ("done", "failed"):
            return job
        time.sleep(0.01)
    raise AssertionError(f"job {job_id} did not settle: {job}")


def ingest_and_wait(client, frames_dir, audio_path=None, video_id="vid"):
    body = {"frames_dir": str(frames_dir), "video_id": video_id}
    if audio_path is not None:
        body["audio_path"] = str(audio_path)
    resp = client.post("/videos", json=body)
    assert resp.status_code == 202, resp.text
    return wait_for_job(client, resp.json()["job_id"])


class TestHealth:
    def test_reports_version_and_count(self, client, frames_dir):
        before = client.get("/health").json()
        assert before == {"status": "ok", "version": __version__, "store_count": 0}
        ingest_and_wait(client, frames_dir)
        assert client.get("/health").json()["store_count"] == 1


class TestIngestEndpoint:
    def test_video_id_defaults_to_directory_name(self, client, frames_dir):
        resp = client.post("/videos", json={"frames_dir": str(frames_dir)})
        assert resp.status_code == 202
        body = resp.json()
        assert body["video_id"] == "frames"
        assert wait_for_job(client, body["job_id"])["state"] == "done"

    def test_missing_frames_dir(self, client, tmp_path):
        resp = client.post("/videos", json={"frames_dir": str(tmp_path / "nope")})
        assert resp.status_code == 400
        assert resp.json()["detail"].startswith("frame directory not found")

    def test_missing_audio_file(self, client, frames_dir, tmp_path):
        resp = client.post(
            "/videos",
            json={"frames_dir": str(frames_dir), "audio_path": str(tmp_path / "gone.wav")},
        )
        assert resp.status_code == 400
        assert resp.json()["detail"].startswith("audio file not found")

    def test_conflicting_ingest_for_same_video(self, engine, frames_dir, monkeypatch):
        gate = threading.Event()
        original = engine.ingest

        def slow_ingest(*args, **kwargs):
            gate.wait(timeout=10)
            return original(*args, **kwargs)

        monkeypatch.setattr(engine, "ingest", slow_ingest)
        with TestClient(create_app(engine, workers=1)) as client:
            first = client.post("/videos", json={"frames_dir": str(frames_dir), "video_id": "vid"})
            assert first.status_code == 202
            second = client.post("/videos", json={"frames_dir": str(frames_dir), "video_id": "vid"})
            assert second.status_code == 409
            assert "already running" in second.json()["detail"]
            gate.set()
            assert wait_for_job(client, first.json()["job_id"])["state"] == "done"


class TestJobLifecycle:
    def test_states_walk_forward_and_progress_never_drops(self, client, frames_dir, caplog):
        caplog.set_level(logging.INFO, logger="multirag.service")
        job = ingest_and_wait(client, frames_dir)
        assert job["state"] == "done"
        assert job["progress"] == 1.0
        assert job["error"] is None
        trail = [
            json.loads(r.message) for r in caplog.records if r.name == "multirag.service"
        ]
        states = [t["state"] for t in trail]
        assert states == [
            "queued",
            "sampling",
            "sampling",
            "describing",
            "describing",
            "transcribing",
            "transcribing",
            "indexing",
            "indexing",
            "done",
        ]
        progresses = [t["progress"] for t in trail]
        assert progresses == [0.0, 0.0, 0.25, 0.25, 0.5, 0.5, 0.75, 0.75, 1.0, 1.0]
        indices = [JOB_STATES.index(s) for s in states]
        assert indices == sorted(indices)

    def test_failed_job_keeps_stage_error(self, tmp_path, frames_dir):
        engine = make_engine(
            tmp_path / "s",
            max_failure_ratio=0.0,
            providers={"vision": ProviderSpec("mock", {"fail_times": -1})},
        )
        with TestClient(create_app(engine, workers=1)) as client:
            job = ingest_and_wait(client, frames_dir)
        assert job["state"] == "failed"
        assert job["error"].startswith("[describing]")

    def test_unknown_job(self, client):
        resp = client.get("/jobs/feedfacefeedface")
        assert resp.status_code == 404
        assert "unknown job" in resp.json()["detail"]


class TestVideoListing:
    def test_lists_completed_stores(self, client, frames_dir, pinned_clock):
        assert client.get("/videos").json() == []
        ingest_and_wait(client, frames_dir)
        listing = client.get("/videos").json()
        assert len(listing) == 1
        entry = listing[0]
        assert entry["video_id"] == "vid"
        assert entry["chunk_count"] > 0
        assert entry["created_at"] == pinned_clock


class TestTranscript:
    def test_json_format(self, client, frames_dir, audio_file):
        ingest_and_wait(client, frames_dir, audio_file)
        body = client.get("/videos/vid/transcript").json()
        assert body["video_id"] == "vid"
        assert len(body["entries"]) == 6
        assert body["entries"][1]["audio_text"] == "hello there"

    def test_markdown_format(self, client, engine, frames_dir, audio_file):
        ingest_and_wait(client, frames_dir, audio_file)
        resp = client.get("/videos/vid/transcript", params={"format": "markdown"})
        assert resp.status_code == 200
        assert resp.headers["content-type"].startswith("text/plain")
        assert resp.text == render_markdown(engine.load_document("vid"))

    def test_unknown_format(self, client, frames_dir):
        ingest_and_wait(client, frames_dir)
        resp = client.get("/videos/vid/transcript", params={"format": "yaml"})
        assert resp.status_code == 400

    def test_missing_video(self, client):
        assert client.get("/videos/ghost/transcript").status_code == 404


class TestSummary:
    def test_labels_and_analysis(self, client, frames_dir, audio_file):
        ingest_and_wait(client, frames_dir, audio_file)
        body = client.get("/videos/vid/summary").json()
        assert body["video_id"] == "vid"
        assert len(body["rolling_summaries"]) == 1
        first = body["rolling_summaries"][0]
        assert first["start"] == 0.0
        assert first["end"] == 5.0
        assert first["label"] == "[00:00:00]-[00:00:05]"
        assert first["text"]
        assert body["preliminary_analysis"]


class TestAskEndpoint:
    def test_answers_with_citations(self, client, frames_dir, audio_file):
        ingest_and_wait(client, frames_dir, audio_file)
        resp = client.post("/videos/vid/ask", json={"question": "What is said first?"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["answer"] == "What is said first?"
        assert body["k"] == 5
        assert body["prompt_type"] == "type2"
        assert body["model_name"] == "mock-llm"
        assert body["latency_ms"] >= 0
        assert [hit["rank"] for hit in body["retrieved"]] == list(
            range(1, len(body["retrieved"]) + 1)
        )
        for hit in body["retrieved"]:
            assert hit["header"].startswith("[doc vid | ")
            assert hit["chunk_id"].startswith("vid:")

    def test_k_override(self, client, frames_dir):
        ingest_and_wait(client, frames_dir)
        body = client.post("/videos/vid/ask", json={"question": "Any?", "k": 2}).json()
        assert body["k"] == 2
        assert len(body["retrieved"]) == 2

    def test_blank_question(self, client, frames_dir):
        ingest_and_wait(client, frames_dir)
        resp = client.post("/videos/vid/ask", json={"question": "   "})
        assert resp.status_code == 400
        assert resp.json()["detail"] == "question must be non-empty"

    def test_bad_k(self, client, frames_dir):
        ingest_and_wait(client, frames_dir)
        resp = client.post("/videos/vid/ask", json={"question": "Any?", "k": 0})
        assert resp.status_code == 400

    def test_bad_prompt_type(self, client, frames_dir):
        ingest_and_wait(client, frames_dir)
        resp = client.post("/videos/vid/ask", json={"question": "Any?", "prompt_type": "type9"})
        assert resp.status_code == 400

    def test_missing_video(self, client):
        resp = client.post("/videos/ghost/ask", json={"question": "Any?"})
        assert resp.status_code == 404
        assert "no store for video" in resp.json()["detail"]

    def test_generator_failure_maps_to_500(self, tmp_path, frames_dir):
        # Text provider failing at ingest only degrades summaries; the same
        # failure at answer time must surface as a server error.
        engine = make_engine(
            tmp_path / "s",
            providers={"text": ProviderSpec("mock", {"fail_times": -1})},
        )
        with TestClient(create_app(engine, workers=1)) as client:
            job = ingest_and_wait(client, frames_dir)
            assert job["state"] == "done"
            resp = client.post("/videos/vid/ask", json={"question": "Any?"})
        assert resp.status_code == 500
        assert resp.json()["detail"].startswith("[generate]")


class TestStaticUi:
    def test_mounts_when_directory_given(self, engine, tmp_path):
        ui = tmp_path / "ui"
        ui.mkdir()
        (ui / "index.html").write_text("<h1>console</h1>", encoding="utf-8")
        with TestClient(create_app(engine, ui_dir=str(ui))) as client:
            resp = client.get("/ui/")
            assert resp.status_code == 200
            assert "console" in resp.text

    def test_env_variable_mount(self, engine, tmp_path, monkeypatch):
        ui = tmp_path / "ui"
        ui.mkdir()
        (ui / "index.html").write_text("<h1>console</h1>", encoding="utf-8")
        monkeypatch.setenv("MULTIRAG_UI_DIR", str(ui))
        with TestClient(create_app(engine)) as client:
            assert client.get("/ui/").status_code == 200

    def test_absent_by_default(self, engine, monkeypatch):
        monkeypatch.delenv("MULTIRAG_UI_DIR", raising=False)
        with TestClient(create_app(engine)) as client:
            assert client.get("/ui/").status_code == 404
