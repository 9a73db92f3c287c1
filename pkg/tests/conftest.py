from __future__ import annotations

from pathlib import Path

import pytest
from PIL import Image

from multirag.pipeline import Engine, EngineConfig, ProviderSpec

# Colors chosen so adjacent frames alternate between "same" and "changed";
# pairs of identical colors exercise the change filter.
DEFAULT_COLORS = [
    (10, 10, 10),
    (10, 10, 10),
    (200, 30, 30),
    (200, 30, 30),
    (30, 200, 30),
    (30, 30, 200),
]


def write_frames(root: Path, colors=DEFAULT_COLORS, size=(16, 12), step_ms=1000):
    root.mkdir(parents=True, exist_ok=True)
    for i, color in enumerate(colors):
        Image.new("RGB", size, color).save(root / f"frame_{i * step_ms:06d}.png")
    return root


@pytest.fixture
def frames_dir(tmp_path):
    return write_frames(tmp_path / "frames")


@pytest.fixture
def audio_file(tmp_path):
    path = tmp_path / "track.wav"
    path.write_bytes(b"RIFF\x00\x00\x00\x00WAVEfake")
    return path


@pytest.fixture
def pinned_clock(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    return "2023-11-14T22:13:20Z"


SEGMENTS = [[0.0, 2.5, "hello there"], [2.5, 5.0, "general remarks"]]


def make_engine(store_root: Path, **overrides) -> Engine:
    providers = {
        "speech": ProviderSpec("mock", {"segments": SEGMENTS}),
        "text": ProviderSpec("mock", {"mode": "echo_question"}),
    }
    providers.update(overrides.pop("providers", {}))
    values = dict(rate=1.0, cutoff=100.0, chunk_size=32, overlap_ratio=0.25)
    values.update(overrides)
    return Engine(EngineConfig(store_root=str(store_root), providers=providers, **values))


@pytest.fixture
def engine(tmp_path):
    return make_engine(tmp_path / "stores")


# One verdict line per acceptance criterion, echoed after the test summary
# so the lines survive output capture.
ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    del exitstatus, config
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
