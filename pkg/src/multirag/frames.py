"""Frame selection: uniform-rate sampling, alternate-frame decimation, and
MSE-based change detection over decoded 8-bit frames.

Frames arrive as pre-extracted image files named ``frame_<milliseconds>.png``
(or ``.jpg``); decoding is canonical 8-bit RGB or grayscale so the mean
squared error between frames is deterministic.
"""

from __future__ import annotations

import io
import re
import statistics
from bisect import bisect_left
from dataclasses import dataclass
from pathlib import Path

from PIL import Image

from . import kernels
from .errors import InvalidInputError

DEFAULT_CHANGE_CUTOFF = 500.0

FRAME_FILE_RE = re.compile(r"^frame_(\d+)\.(png|jpe?g)$", re.IGNORECASE)


@dataclass(frozen=True)
class Frame:
    """One decoded frame: an 8-bit intensity grid plus its timestamp."""

    width: int
    height: int
    channels: int
    pixels: bytes
    timestamp: float
    source: str | None = None

    def __post_init__(self):
        if not isinstance(self.pixels, bytes):
            try:
                object.__setattr__(self, "pixels", bytes(self.pixels))
            except (ValueError, TypeError) as exc:
                raise InvalidInputError(
                    f"pixel intensities must be integers in [0, 255]: {exc}"
                ) from exc
        expected = self.width * self.height * self.channels
        if len(self.pixels) != expected:
            raise InvalidInputError(
                f"pixel buffer has {len(self.pixels)} values, expected "
                f"{self.width}x{self.height}x{self.channels} = {expected}"
            )
        if self.timestamp < 0:
            raise InvalidInputError(f"timestamp must be >= 0, got {self.timestamp}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.width, self.height, self.channels)


@dataclass(frozen=True)
class SampledFrameSet:
    """Ordered frames that survived sampling, with the rate they represent."""

    video_id: str
    frames: tuple[Frame, ...]
    effective_rate: float

    def __post_init__(self):
        if not isinstance(self.frames, tuple):
            object.__setattr__(self, "frames", tuple(self.frames))
        if self.effective_rate <= 0:
            raise InvalidInputError(
                f"effective_rate must be positive, got {self.effective_rate}"
            )
        stamps = [f.timestamp for f in self.frames]
        if any(b <= a for a, b in zip(stamps, stamps[1:])):
            raise InvalidInputError("frame timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class ChangeFilterConfig:
    """MSE threshold for the slide-style change filter."""

    cutoff: float = DEFAULT_CHANGE_CUTOFF

    def __post_init__(self):
        if self.cutoff < 0:
            raise InvalidInputError(f"cutoff must be >= 0, got {self.cutoff}")


def mse(a: Frame, b: Frame) -> float:
    """Mean squared error between two frames of identical shape.

    Accumulates the squared differences in exact integer arithmetic and
    divides once, so the result is bit-identical across platforms and
    kernel backends.
    """
    if a.shape != b.shape:
        raise InvalidInputError(
            f"frame shape mismatch: {a.width}x{a.height}x{a.channels} vs "
            f"{b.width}x{b.height}x{b.channels}"
        )
    count = a.width * a.height * a.channels
    return kernels.sq_diff_sum(a.pixels, b.pixels) / count


def uniform_sample(frames, rate: float, video_id: str = "") -> SampledFrameSet:
    """Keep, for each instant t = 0, 1/rate, 2/rate, ..., the earliest
    not-yet-kept frame with timestamp >= t."""
    if rate <= 0:
        raise InvalidInputError(f"sampling rate must be positive, got {rate}")
    frames = list(frames)
    if not frames:
        return SampledFrameSet(video_id, (), rate)
    stamps = [f.timestamp for f in frames]
    kept: list[Frame] = []
    last = -1
    tick = 0
    while True:
        t = tick / rate
        if t > stamps[-1]:
            break
        idx = max(bisect_left(stamps, t), last + 1)
        if idx < len(frames):
            kept.append(frames[idx])
            last = idx
        tick += 1
    return SampledFrameSet(video_id, tuple(kept), rate)


def decimate_alternate(sampled: SampledFrameSet) -> SampledFrameSet:
    """Halve the rate by keeping only the even-positioned frames."""
    return SampledFrameSet(
        sampled.video_id, sampled.frames[::2], sampled.effective_rate / 2
    )


def change_filter(
    frames, config: ChangeFilterConfig, video_id: str = ""
) -> SampledFrameSet:
    """Keep the first frame, then any frame whose MSE against the last KEPT
    frame exceeds the cutoff."""
    frames = list(frames)
    if not frames:
        return SampledFrameSet(video_id, (), 1.0)
    kept = [frames[0]]
    for frame in frames[1:]:
        if mse(kept[-1], frame) > config.cutoff:
            kept.append(frame)
    span = kept[-1].timestamp - kept[0].timestamp
    rate = (len(kept) - 1) / span if len(kept) > 1 and span > 0 else 1.0
    return SampledFrameSet(video_id, tuple(kept), rate)


def decode_image(data: bytes, mode: str = "rgb") -> tuple[int, int, int, bytes]:
    """Decode PNG/JPEG bytes to (width, height, channels, pixels)."""
    if mode not in ("rgb", "grayscale"):
        raise InvalidInputError(f"decode mode must be 'rgb' or 'grayscale', got {mode!r}")
    with Image.open(io.BytesIO(data)) as im:
        im = im.convert("RGB" if mode == "rgb" else "L")
        return im.width, im.height, 3 if mode == "rgb" else 1, im.tobytes()


def load_frame_dir(path, decode_mode: str = "rgb") -> list[Frame]:
    """Load ``frame_<ms>.png|jpg`` files from a directory, ordered by
    timestamp. Mixed frame dimensions are rejected rather than resized."""
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"frame directory not found: {root}")
    entries: list[tuple[int, Path]] = []
    for child in root.iterdir():
        m = FRAME_FILE_RE.match(child.name)
        if m:
            entries.append((int(m.group(1)), child))
    entries.sort()
    frames: list[Frame] = []
    for ms, child in entries:
        width, height, channels, pixels = decode_image(child.read_bytes(), decode_mode)
        frame = Frame(width, height, channels, pixels, ms / 1000.0, str(child))
        if frames and frame.shape != frames[0].shape:
            raise InvalidInputError(
                f"frame dimensions change within video: {child.name} is "
                f"{frame.width}x{frame.height}x{frame.channels}, expected "
                f"{frames[0].width}x{frames[0].height}x{frames[0].channels}"
            )
        frames.append(frame)
    return frames


def mse_histogram(frames, bins: int = 10) -> dict:
    """Consecutive-pair MSE statistics for cutoff calibration.

    The suggested cutoff is the midpoint of the widest gap in the sorted MSE
    values: on slide-style footage that gap separates the within-slide noise
    cluster from genuine transitions.
    """
    frames = list(frames)
    values = [mse(a, b) for a, b in zip(frames, frames[1:])]
    report: dict = {"frame_count": len(frames), "pair_count": len(values)}
    if not values:
        report.update(histogram=[], suggested_cutoff=None)
        return report
    lo, hi = min(values), max(values)
    report.update(
        min=lo,
        max=hi,
        mean=statistics.fmean(values),
        median=statistics.median(values),
    )
    width = (hi - lo) / bins if hi > lo else 1.0
    counts = [0] * bins
    for v in values:
        counts[min(int((v - lo) / width), bins - 1)] += 1
    report["histogram"] = [
        {"lo": lo + i * width, "hi": lo + (i + 1) * width, "count": c}
        for i, c in enumerate(counts)
    ]
    ordered = sorted(values)
    best_gap, cutoff = 0.0, None
    for a, b in zip(ordered, ordered[1:]):
        if b - a > best_gap:
            best_gap, cutoff = b - a, (a + b) / 2
    report["suggested_cutoff"] = cutoff
    return report
