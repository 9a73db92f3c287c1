"""Turn sampled frames plus audio into a timestamped transcript document.

The document is the unit everything downstream consumes: a timeline of
frame descriptions with aligned speech, rolling summaries over fixed or
event-driven windows, and a one-shot preliminary analysis.  It renders to
Markdown for humans and round-trips losslessly back into the same value.
"""

from __future__ import annotations

import io
import json
import math
import re
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

from PIL import Image

from .assets import load_asset
from .errors import InvalidInputError, ProviderError, StageError
from .frames import Frame, SampledFrameSet
from .providers.base import AudioSegment, SpeechProvider, TextProvider, VisionProvider

DEFAULT_SUMMARY_INTERVAL = 60.0
DEFAULT_DESCRIBE_CONCURRENCY = 4
DEFAULT_MAX_FAILURE_RATIO = 0.2
DESCRIPTION_FALLBACK = "(description unavailable)"

SUPPORTED_AUDIO_SUFFIXES = frozenset({".wav", ".mp3", ".m4a", ".flac", ".ogg", ".webm"})

_EMPTY_BODY = "(none)"
_ESCAPE_PREFIXES = ("#", ">", "\\", "<!--")


def format_hms(seconds: float) -> str:
    """Render a non-negative timestamp as HH:MM:SS, flooring fractions."""
    total = int(seconds)
    hours, rem = divmod(total, 3600)
    minutes, secs = divmod(rem, 60)
    return f"{hours:02d}:{minutes:02d}:{secs:02d}"


def _check_text(value: str, what: str, *, allow_empty: bool = True) -> str:
    if not isinstance(value, str):
        raise InvalidInputError(f"{what} must be a string")
    if "\r" in value:
        raise InvalidInputError(f"{what} must not contain carriage returns")
    if value != value.strip():
        raise InvalidInputError(f"{what} must not have leading or trailing whitespace")
    if not allow_empty and not value:
        raise InvalidInputError(f"{what} must not be empty")
    return value


def _check_timestamp(value: float, what: str) -> float:
    out = float(value)
    if not math.isfinite(out) or out < 0:
        raise InvalidInputError(f"{what} must be a finite non-negative number")
    return out


@dataclass(frozen=True)
class FrameDescription:
    """One frame's description; error records a provider failure, if any."""

    timestamp: float
    text: str
    frame_source: str | None = None
    error: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "timestamp", _check_timestamp(self.timestamp, "timestamp"))
        _check_text(self.text, "description text", allow_empty=False)


@dataclass(frozen=True)
class TranscriptEntry:
    timestamp: float
    frame_description: str
    audio_text: str = ""
    frame_source: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "timestamp", _check_timestamp(self.timestamp, "timestamp"))
        _check_text(self.frame_description, "frame_description", allow_empty=False)
        _check_text(self.audio_text, "audio_text")
        if self.frame_source is not None and (
            "\n" in self.frame_source or "-->" in self.frame_source
        ):
            raise InvalidInputError("frame_source must not contain newlines or '-->'")


@dataclass(frozen=True)
class RollingSummary:
    start: float
    end: float
    text: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "start", _check_timestamp(self.start, "summary start"))
        object.__setattr__(self, "end", _check_timestamp(self.end, "summary end"))
        if self.end < self.start:
            raise InvalidInputError("summary window must not end before it starts")
        _check_text(self.text, "summary text")


@dataclass(frozen=True)
class AuxiliaryMetadata:
    rolling_summaries: tuple[RollingSummary, ...] = ()
    preliminary_analysis: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "rolling_summaries", tuple(self.rolling_summaries))
        _check_text(self.preliminary_analysis, "preliminary_analysis")
        summaries = self.rolling_summaries
        for prev, cur in zip(summaries, summaries[1:]):
            if cur.start < prev.end:
                raise InvalidInputError("summary windows must be ordered and non-overlapping")


_FLAG_RE = re.compile(r"^[a-z0-9_.:-]+$")


@dataclass(frozen=True)
class TranscriptDocument:
    video_id: str
    entries: tuple[TranscriptEntry, ...]
    auxiliary: AuxiliaryMetadata = field(default_factory=AuxiliaryMetadata)
    created_at: str = ""
    pipeline_config_digest: str = ""
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.video_id or "\n" in self.video_id or self.video_id != self.video_id.strip():
            raise InvalidInputError("video_id must be a non-empty single-line identifier")
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "flags", tuple(self.flags))
        stamps = [e.timestamp for e in self.entries]
        if any(b <= a for a, b in zip(stamps, stamps[1:])):
            raise InvalidInputError("entries must be ordered by strictly increasing timestamp")
        if any(ch in self.created_at for ch in ("\n", "|")) or "-->" in self.created_at:
            raise InvalidInputError("created_at must be a single line without '|' or '-->'")
        if not re.fullmatch(r"[0-9a-f]*", self.pipeline_config_digest):
            raise InvalidInputError("pipeline_config_digest must be lowercase hex")
        for flag in self.flags:
            if not _FLAG_RE.match(flag):
                raise InvalidInputError(f"malformed flag {flag!r}")

    def entry_window(self, center: float, radius: int = 1) -> tuple[TranscriptEntry, ...]:
        """Entries nearest to a timestamp, radius neighbors to each side."""
        if not self.entries:
            return ()
        stamps = [e.timestamp for e in self.entries]
        idx = min(range(len(stamps)), key=lambda i: (abs(stamps[i] - center), i))
        lo = max(0, idx - radius)
        return self.entries[lo : idx + radius + 1]


def describe_frames(
    sampled: SampledFrameSet,
    vlm: VisionProvider,
    description_prompt: str | None = None,
    *,
    concurrency: int = DEFAULT_DESCRIBE_CONCURRENCY,
    max_failure_ratio: float = DEFAULT_MAX_FAILURE_RATIO,
    image_bytes_fn: Callable[[Frame], bytes] | None = None,
) -> list[FrameDescription]:
    """Describe every sampled frame, tolerating a bounded share of failures.

    Frames are sent through a pool of at most `concurrency` workers; output
    order matches input order regardless of completion order.  A failed frame
    gets a placeholder description and its error recorded.  If more than
    `max_failure_ratio` of the frames fail the whole stage is abandoned.
    """
    if concurrency < 1:
        raise InvalidInputError("concurrency must be at least 1")
    frames = sampled.frames
    if not frames:
        return []
    prompt = description_prompt if description_prompt is not None else load_asset("frame_description.txt")
    to_bytes = image_bytes_fn or _frame_image_bytes

    def work(frame: Frame) -> tuple[str, str | None]:
        try:
            return vlm.describe_image(to_bytes(frame), prompt), None
        except ProviderError as exc:
            return "", str(exc)

    with ThreadPoolExecutor(max_workers=min(concurrency, len(frames))) as pool:
        raw = list(pool.map(work, frames))

    out: list[FrameDescription] = []
    failures = 0
    for frame, (text, error) in zip(frames, raw):
        text = text.strip()
        if error is None and not text:
            error = "provider returned an empty description"
        if error is not None:
            failures += 1
            text = DESCRIPTION_FALLBACK
        out.append(FrameDescription(frame.timestamp, text, frame.source, error))
    if failures and failures / len(frames) > max_failure_ratio:
        raise StageError(
            "describing",
            f"{failures} of {len(frames)} frame descriptions failed",
        )
    return out


def _frame_image_bytes(frame: Frame) -> bytes:
    if frame.source:
        path = Path(frame.source)
        if path.is_file():
            return path.read_bytes()
    mode = {1: "L", 3: "RGB"}.get(frame.channels)
    if mode is None:
        raise InvalidInputError(f"cannot encode a {frame.channels}-channel frame")
    image = Image.frombytes(mode, (frame.width, frame.height), frame.pixels)
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()


def normalize_segments(segments: Iterable[AudioSegment]) -> list[AudioSegment]:
    """Sort segments, drop empty ones, and resolve overlaps.

    When two segments overlap, the earlier one is truncated at the later
    one's start; an earlier segment fully covered by a later start is
    dropped.  The result is ordered and non-overlapping.
    """
    ordered = sorted(segments, key=lambda s: (s.start, s.end))
    out: list[AudioSegment] = []
    for seg in ordered:
        text = seg.text.replace("\r\n", "\n").replace("\r", "\n").strip()
        if not text:
            continue
        start, end = float(seg.start), float(seg.end)
        while out and out[-1].end > start:
            prev = out.pop()
            if start > prev.start:
                out.append(AudioSegment(prev.start, start, prev.text))
                break
        out.append(AudioSegment(start, end, text))
    return out


def transcribe_audio(audio_path: str | Path, asr: SpeechProvider) -> list[AudioSegment]:
    """Transcribe an audio file into normalized segments."""
    path = Path(audio_path)
    suffix = path.suffix.lower()
    if suffix not in SUPPORTED_AUDIO_SUFFIXES:
        supported = ", ".join(sorted(SUPPORTED_AUDIO_SUFFIXES))
        raise InvalidInputError(f"unsupported audio format {suffix!r} (expected one of: {supported})")
    data = path.read_bytes()
    return normalize_segments(asr.transcribe(data))


def align(
    descriptions: Sequence[FrameDescription],
    segments: Sequence[AudioSegment],
) -> list[TranscriptEntry]:
    """Attach each segment to the frame whose window holds its midpoint.

    Frame timestamps split the timeline into half-open windows; the last
    window extends to infinity and the first absorbs anything earlier than
    the first frame.  Segment order is preserved within an entry.
    """
    descs = list(descriptions)
    if not descs:
        return []
    stamps = [d.timestamp for d in descs]
    buckets: list[list[str]] = [[] for _ in descs]
    for seg in segments:
        mid = (seg.start + seg.end) / 2.0
        idx = bisect_right(stamps, mid) - 1
        buckets[max(idx, 0)].append(seg.text)
    return [
        TranscriptEntry(d.timestamp, d.text, " ".join(bucket), d.frame_source)
        for d, bucket in zip(descs, buckets)
    ]


def summary_windows(
    end: float,
    *,
    interval: float = DEFAULT_SUMMARY_INTERVAL,
    events: Sequence[float] | None = None,
) -> list[tuple[float, float]]:
    """Split [0, end] into summary windows by fixed interval or event times."""
    end = _check_timestamp(end, "window end")
    if events is not None:
        bounds = sorted({0.0, end} | {float(e) for e in events if 0.0 < e < end})
        if len(bounds) < 2:
            return [(0.0, end)]
        return list(zip(bounds, bounds[1:]))
    if interval <= 0:
        raise InvalidInputError("summary interval must be positive")
    count = max(1, math.ceil(end / interval))
    bounds = [i * interval for i in range(count)] + [end]
    return list(zip(bounds, bounds[1:]))


def _entry_line(entry: TranscriptEntry, include_audio: bool) -> str:
    line = f"[{format_hms(entry.timestamp)}] {entry.frame_description}"
    if include_audio and entry.audio_text:
        line += f" {entry.audio_text}"
    return line


def _fill_two_slots(template: str, first: tuple[str, str], second: tuple[str, str]) -> str:
    pattern = re.compile("|".join(re.escape(f"{{{name}}}") for name, _ in (first, second)))
    values = {f"{{{name}}}": value for name, value in (first, second)}
    return pattern.sub(lambda m: values[m.group(0)], template)


def summarize(
    entries: Sequence[TranscriptEntry],
    llm: TextProvider,
    *,
    interval: float = DEFAULT_SUMMARY_INTERVAL,
    events: Sequence[float] | None = None,
    include_audio: bool = True,
    prompt_template: str | None = None,
) -> list[RollingSummary]:
    """Produce one rolling summary per window, threading the previous one.

    Each window's prompt carries the latest successful summary so far, so
    the chain stays coherent.  A window whose generation fails is recorded
    with empty text and the run continues.
    """
    if not entries:
        raise InvalidInputError("cannot summarize an empty transcript")
    template = prompt_template if prompt_template is not None else load_asset("summary.txt")
    windows = summary_windows(entries[-1].timestamp, interval=interval, events=events)
    out: list[RollingSummary] = []
    previous = ""
    for index, (lo, hi) in enumerate(windows):
        last = index == len(windows) - 1
        members = [
            e for e in entries if lo <= e.timestamp < hi or (last and e.timestamp == hi)
        ]
        window_text = "\n".join(_entry_line(e, include_audio) for e in members) or "(no entries)"
        prompt = _fill_two_slots(
            template,
            ("previous_summary", previous or "(none)"),
            ("window_text", window_text),
        )
        try:
            text = llm.generate(prompt).strip()
        except ProviderError:
            text = ""
        out.append(RollingSummary(lo, hi, text))
        if text:
            previous = text
    return out


def analyze(
    entries: Sequence[TranscriptEntry],
    llm: TextProvider,
    *,
    include_audio: bool = True,
    prompt: str | None = None,
) -> str:
    """One-shot Topic/Emotion/Scene/Style read over the whole timeline.

    Raises on provider failure; the caller decides whether that is fatal.
    """
    if not entries:
        raise InvalidInputError("cannot analyze an empty transcript")
    header = prompt if prompt is not None else load_asset("analysis.txt")
    timeline = "\n".join(_entry_line(e, include_audio) for e in entries)
    return llm.generate(f"{header}\n{timeline}").strip()


def encode_document(
    sampled: SampledFrameSet,
    *,
    vlm: VisionProvider,
    asr: SpeechProvider | None = None,
    llm: TextProvider | None = None,
    audio_path: str | Path | None = None,
    description_prompt: str | None = None,
    summary_interval: float = DEFAULT_SUMMARY_INTERVAL,
    summary_events: Sequence[float] | None = None,
    include_audio_in_summaries: bool = True,
    concurrency: int = DEFAULT_DESCRIBE_CONCURRENCY,
    max_failure_ratio: float = DEFAULT_MAX_FAILURE_RATIO,
    created_at: str = "",
    config_digest: str = "",
    image_bytes_fn: Callable[[Frame], bytes] | None = None,
) -> TranscriptDocument:
    """Run description, transcription, alignment, and auxiliary metadata."""
    descriptions = describe_frames(
        sampled,
        vlm,
        description_prompt,
        concurrency=concurrency,
        max_failure_ratio=max_failure_ratio,
        image_bytes_fn=image_bytes_fn,
    )
    segments: list[AudioSegment] = []
    if audio_path is not None:
        if asr is None:
            raise InvalidInputError("audio_path given but no speech provider configured")
        segments = transcribe_audio(audio_path, asr)
    entries = align(descriptions, segments)

    flags: list[str] = []
    failed = sum(1 for d in descriptions if d.error is not None)
    if failed:
        flags.append(f"frame_failures:{failed}")

    auxiliary = AuxiliaryMetadata()
    if entries and llm is not None:
        summaries = summarize(
            entries,
            llm,
            interval=summary_interval,
            events=summary_events,
            include_audio=include_audio_in_summaries,
        )
        unsummarized = sum(1 for s in summaries if not s.text)
        if unsummarized:
            flags.append(f"unsummarized_windows:{unsummarized}")
        try:
            analysis = analyze(entries, llm, include_audio=include_audio_in_summaries)
        except ProviderError:
            analysis = ""
            flags.append("analysis_failed")
        auxiliary = AuxiliaryMetadata(tuple(summaries), analysis)

    return TranscriptDocument(
        video_id=sampled.video_id or "video",
        entries=tuple(entries),
        auxiliary=auxiliary,
        created_at=created_at,
        pipeline_config_digest=config_digest,
        flags=tuple(flags),
    )


# Markdown rendering.  Structure is carried by headings and comment lines;
# body lines that could be mistaken for structure get a backslash prefix.

_HEADER_COMMENT_RE = re.compile(r"^<!-- created=(.*) \| digest=([0-9a-f]*) \| flags=(.*) -->$")
_TS_COMMENT_RE = re.compile(r"^<!-- ts=([^ ]+)(?: \| src=(.*))? -->$")
_RANGE_COMMENT_RE = re.compile(r"^<!-- range=([^: ]+):([^ ]+) -->$")


def _escape_line(line: str) -> str:
    if line.startswith(_ESCAPE_PREFIXES) or line == _EMPTY_BODY:
        return "\\" + line
    return line


def _render_body(text: str) -> str:
    if text == "":
        return _EMPTY_BODY
    return "\n".join(_escape_line(line) for line in text.split("\n"))


def _parse_body(lines: list[str]) -> str:
    while lines and not lines[0].strip():
        lines.pop(0)
    while lines and not lines[-1].strip():
        lines.pop()
    if lines == [_EMPTY_BODY]:
        return ""
    return "\n".join(line[1:] if line.startswith("\\") else line for line in lines)


def render_markdown(doc: TranscriptDocument) -> str:
    """Render a document to Markdown that parse_markdown inverts exactly."""
    out = [
        f"# {doc.video_id}",
        f"<!-- created={doc.created_at} | digest={doc.pipeline_config_digest}"
        f" | flags={','.join(doc.flags)} -->",
        "",
        "## Analysis",
        "",
        _render_body(doc.auxiliary.preliminary_analysis),
        "",
        "## Summaries",
        "",
    ]
    if doc.auxiliary.rolling_summaries:
        for summary in doc.auxiliary.rolling_summaries:
            out += [
                f"### [{format_hms(summary.start)}]-[{format_hms(summary.end)}]",
                f"<!-- range={summary.start!r}:{summary.end!r} -->",
                _render_body(summary.text),
                "",
            ]
    else:
        out += [_EMPTY_BODY, ""]
    out += ["## Timeline", ""]
    for entry in doc.entries:
        src = f" | src={entry.frame_source}" if entry.frame_source is not None else ""
        out += [
            f"### [{format_hms(entry.timestamp)}]",
            f"<!-- ts={entry.timestamp!r}{src} -->",
            _render_body(entry.frame_description),
        ]
        if entry.audio_text:
            out.append("")
            out += ["> " + line for line in entry.audio_text.split("\n")]
        out.append("")
    return "\n".join(out)


def _split_blocks(lines: list[str], what: str) -> list[tuple[str, list[str]]]:
    blocks: list[tuple[str, list[str]]] = []
    for line in lines:
        if line.startswith("### "):
            blocks.append((line, []))
        elif blocks:
            blocks[-1][1].append(line)
        elif line.strip() and line.strip() != _EMPTY_BODY:
            raise InvalidInputError(f"unexpected text before the first {what} heading: {line!r}")
    return blocks


def _parse_summary_block(heading: str, body: list[str]) -> RollingSummary:
    if not body:
        raise InvalidInputError(f"summary block {heading!r} is missing its range comment")
    match = _RANGE_COMMENT_RE.match(body[0])
    if not match:
        raise InvalidInputError(f"summary block {heading!r} has a malformed range comment")
    start, end = float(match.group(1)), float(match.group(2))
    return RollingSummary(start, end, _parse_body(body[1:]))


def _parse_timeline_block(heading: str, body: list[str]) -> TranscriptEntry:
    if not body:
        raise InvalidInputError(f"timeline block {heading!r} is missing its timestamp comment")
    match = _TS_COMMENT_RE.match(body[0])
    if not match:
        raise InvalidInputError(f"timeline block {heading!r} has a malformed timestamp comment")
    timestamp = float(match.group(1))
    source = match.group(2)
    rest = body[1:]
    quote_at = next((i for i, line in enumerate(rest) if line.startswith(">")), len(rest))
    description = _parse_body(rest[:quote_at])
    audio_lines = []
    for line in rest[quote_at:]:
        if line.startswith(">"):
            audio_lines.append(line[2:] if line.startswith("> ") else line[1:])
        elif line.strip():
            raise InvalidInputError(f"timeline block {heading!r} has text after its audio quote")
    audio_text = "\n".join(audio_lines)
    return TranscriptEntry(timestamp, description, audio_text, source)


def parse_markdown(text: str) -> TranscriptDocument:
    """Parse Markdown produced by render_markdown back into a document."""
    lines = text.split("\n")
    if len(lines) < 2 or not lines[0].startswith("# "):
        raise InvalidInputError("transcript must start with a '# <video id>' line")
    video_id = lines[0][2:]
    header = _HEADER_COMMENT_RE.match(lines[1])
    if not header:
        raise InvalidInputError("transcript is missing its metadata comment line")
    created_at, digest, flags_joined = header.groups()
    flags = tuple(flag for flag in flags_joined.split(",") if flag)

    markers = {"## Analysis": -1, "## Summaries": -1, "## Timeline": -1}
    for index, line in enumerate(lines):
        if line in markers:
            if markers[line] != -1:
                raise InvalidInputError(f"duplicate section heading {line!r}")
            markers[line] = index
    positions = [markers["## Analysis"], markers["## Summaries"], markers["## Timeline"]]
    if -1 in positions or positions != sorted(positions):
        raise InvalidInputError("transcript must contain Analysis, Summaries, Timeline in order")
    a_at, s_at, t_at = positions

    analysis = _parse_body(lines[a_at + 1 : s_at])
    summary_blocks = _split_blocks(lines[s_at + 1 : t_at], "summary")
    summaries = tuple(_parse_summary_block(h, b) for h, b in summary_blocks)
    entry_blocks = _split_blocks(lines[t_at + 1 :], "timeline")
    entries = tuple(_parse_timeline_block(h, b) for h, b in entry_blocks)

    return TranscriptDocument(
        video_id=video_id,
        entries=entries,
        auxiliary=AuxiliaryMetadata(summaries, analysis),
        created_at=created_at,
        pipeline_config_digest=digest,
        flags=flags,
    )


def document_to_dict(doc: TranscriptDocument) -> dict:
    return {
        "video_id": doc.video_id,
        "created_at": doc.created_at,
        "pipeline_config_digest": doc.pipeline_config_digest,
        "flags": list(doc.flags),
        "entries": [
            {
                "timestamp": e.timestamp,
                "frame_description": e.frame_description,
                "audio_text": e.audio_text,
                "frame_source": e.frame_source,
            }
            for e in doc.entries
        ],
        "auxiliary": {
            "rolling_summaries": [
                {"start": s.start, "end": s.end, "text": s.text}
                for s in doc.auxiliary.rolling_summaries
            ],
            "preliminary_analysis": doc.auxiliary.preliminary_analysis,
        },
    }


def document_from_dict(data: dict) -> TranscriptDocument:
    try:
        aux = data["auxiliary"]
        return TranscriptDocument(
            video_id=data["video_id"],
            entries=tuple(
                TranscriptEntry(
                    e["timestamp"],
                    e["frame_description"],
                    e.get("audio_text", ""),
                    e.get("frame_source"),
                )
                for e in data["entries"]
            ),
            auxiliary=AuxiliaryMetadata(
                tuple(
                    RollingSummary(s["start"], s["end"], s["text"])
                    for s in aux["rolling_summaries"]
                ),
                aux["preliminary_analysis"],
            ),
            created_at=data.get("created_at", ""),
            pipeline_config_digest=data.get("pipeline_config_digest", ""),
            flags=tuple(data.get("flags", ())),
        )
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"malformed transcript record: {exc}") from exc


def dump_document_json(doc: TranscriptDocument) -> str:
    return json.dumps(document_to_dict(doc), ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def load_document_json(text: str) -> TranscriptDocument:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"malformed transcript JSON: {exc}") from exc
    return document_from_dict(data)


def strip_audio(doc: TranscriptDocument) -> TranscriptDocument:
    """Copy of the document with every entry's audio text removed."""
    return replace(doc, entries=tuple(replace(e, audio_text="") for e in doc.entries))
