"""Benchmark loading, 0-3 judged scoring, and capability scorecards.

Questions are answered per video, candidates are judged against annotated
answers on a 0-3 semantic-similarity scale, and means are aggregated per
capability plus Perception / Reasoning / Overall roll-ups.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .agent import AnswerRecord, PromptTemplate, answer
from .assets import load_asset
from .errors import IntegrityError, InvalidInputError, ProtocolError, ScoringError
from .providers.base import EmbeddingProvider, TextProvider
from .store import KnowledgeStore

PERCEPTION_CAPABILITIES = ("CP", "FP-S", "FP-C", "HL")
REASONING_CAPABILITIES = ("LR", "AR", "RR", "CSR", "TR")
CAPABILITIES = PERCEPTION_CAPABILITIES + REASONING_CAPABILITIES

DOMAIN_OF = {cap: "Perception" for cap in PERCEPTION_CAPABILITIES}
DOMAIN_OF.update({cap: "Reasoning" for cap in REASONING_CAPABILITIES})

BENCHMARK_COLUMNS = ("item_id", "video_id", "question", "answer", "l2", "l1")

JUDGE_REASKS = 2
DEFAULT_TOPK_SWEEP = (1, 3, 5, 7)

ABLATION_TOGGLES = ("audio", "auxiliary_metadata")
# Which chunk kinds each toggle removes from the store.
TOGGLE_KINDS = {
    "audio": ("audio",),
    "auxiliary_metadata": ("summary", "analysis"),
}


@dataclass(frozen=True)
class BenchmarkItem:
    item_id: str
    video_id: str
    question: str
    ground_truth: str
    l2_capability: str
    l1_domain: str

    def __post_init__(self) -> None:
        for name in ("item_id", "video_id", "question", "ground_truth"):
            if not getattr(self, name):
                raise InvalidInputError(f"benchmark item field {name} must be non-empty")
        if self.l2_capability not in CAPABILITIES:
            raise InvalidInputError(f"unknown capability {self.l2_capability!r}")
        expected = DOMAIN_OF[self.l2_capability]
        if self.l1_domain != expected:
            raise InvalidInputError(
                f"capability {self.l2_capability} belongs to {expected}, not {self.l1_domain!r}"
            )


@dataclass(frozen=True)
class JudgeVerdict:
    item_id: str
    score: int
    raw_reply: str

    def __post_init__(self) -> None:
        if self.score not in (0, 1, 2, 3):
            raise InvalidInputError(f"score must be one of 0..3, got {self.score!r}")


def _tsv_error(path: Path, line_number: int, message: str) -> InvalidInputError:
    return InvalidInputError(f"{path}:{line_number}: {message}")


def _item_from_fields(fields: Mapping[str, str]) -> BenchmarkItem:
    return BenchmarkItem(
        item_id=str(fields["item_id"]),
        video_id=str(fields["video_id"]),
        question=str(fields["question"]),
        ground_truth=str(fields["answer"]),
        l2_capability=str(fields["l2"]),
        l1_domain=str(fields["l1"]),
    )


def load_benchmark(path: str | Path) -> list[BenchmarkItem]:
    """Read benchmark items from a TSV (header row required) or JSON list."""
    source = Path(path)
    text = source.read_text(encoding="utf-8")
    if source.suffix.lower() == ".json":
        return _load_benchmark_json(source, text)
    return _load_benchmark_tsv(source, text)


def _load_benchmark_tsv(source: Path, text: str) -> list[BenchmarkItem]:
    lines = text.splitlines()
    if not lines:
        return []
    header = tuple(part.strip() for part in lines[0].split("\t"))
    if header != BENCHMARK_COLUMNS:
        raise _tsv_error(
            source, 1, f"header must be {list(BENCHMARK_COLUMNS)}, got {list(header)}"
        )
    items: list[BenchmarkItem] = []
    seen: set[str] = set()
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != len(BENCHMARK_COLUMNS):
            raise _tsv_error(
                source, number, f"expected {len(BENCHMARK_COLUMNS)} columns, got {len(parts)}"
            )
        fields = dict(zip(BENCHMARK_COLUMNS, parts))
        try:
            item = _item_from_fields(fields)
        except InvalidInputError as exc:
            raise _tsv_error(source, number, str(exc)) from exc
        if item.item_id in seen:
            raise _tsv_error(source, number, f"duplicate item_id {item.item_id!r}")
        seen.add(item.item_id)
        items.append(item)
    return items


def _load_benchmark_json(source: Path, text: str) -> list[BenchmarkItem]:
    if not text.strip():
        return []
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _tsv_error(source, exc.lineno, f"invalid JSON: {exc.msg}") from exc
    if not isinstance(data, list):
        raise _tsv_error(source, 1, "JSON benchmark must be a list of objects")
    items: list[BenchmarkItem] = []
    seen: set[str] = set()
    for index, entry in enumerate(data):
        if not isinstance(entry, dict):
            raise _tsv_error(source, 1, f"entry {index} is not an object")
        missing = [c for c in BENCHMARK_COLUMNS if c not in entry]
        if missing:
            raise _tsv_error(source, 1, f"entry {index} is missing fields {missing}")
        try:
            item = _item_from_fields(entry)
        except InvalidInputError as exc:
            raise _tsv_error(source, 1, f"entry {index}: {exc}") from exc
        if item.item_id in seen:
            raise _tsv_error(source, 1, f"duplicate item_id {item.item_id!r}")
        seen.add(item.item_id)
        items.append(item)
    return items


_DIGIT_RUN_RE = re.compile(r"\d+")


def parse_score(reply: str) -> int:
    """First standalone integer in {0,1,2,3}; digit runs like "10" don't count."""
    for match in _DIGIT_RUN_RE.finditer(reply):
        value = int(match.group(0))
        if value in (0, 1, 2, 3):
            return value
    raise ProtocolError(f"no standalone 0-3 score in judge reply {reply!r}")


_JUDGE_SLOT_RE = re.compile(
    r"\[QUESTION\]|\[ANNOTATED ANSWER\]|\[CANDIDATE ANSWER\]"
)


def fill_judge_prompt(question: str, ground_truth: str, candidate: str) -> str:
    """Substitute the three judge slots in one pass, nothing else."""
    template = load_asset("judge.txt")
    values = {
        "[QUESTION]": question,
        "[ANNOTATED ANSWER]": ground_truth,
        "[CANDIDATE ANSWER]": candidate,
    }
    return _JUDGE_SLOT_RE.sub(lambda m: values[m.group(0)], template)


def judge(
    question: str,
    ground_truth: str,
    candidate: str,
    provider: TextProvider,
    *,
    item_id: str = "",
    reasks: int = JUDGE_REASKS,
) -> JudgeVerdict:
    """Score a candidate 0-3, re-asking a bounded number of times."""
    for name, value in (("question", question), ("ground_truth", ground_truth), ("candidate", candidate)):
        if not value:
            raise InvalidInputError(f"judge {name} must be non-empty")
    prompt = fill_judge_prompt(question, ground_truth, candidate)
    reply = ""
    for _ in range(reasks + 1):
        reply = provider.generate(prompt)
        try:
            return JudgeVerdict(item_id=item_id, score=parse_score(reply), raw_reply=reply)
        except ProtocolError:
            continue
    raise ScoringError(
        f"judge reply for item {item_id!r} stayed unparsable after {reasks} re-asks: {reply!r}"
    )


@dataclass(frozen=True)
class CapabilityScorecard:
    per_capability_mean: dict[str, float | None]
    item_counts: dict[str, int]
    perception_mean: float | None
    reasoning_mean: float | None
    overall_mean: float | None
    scored_count: int
    unscored: int = 0


def aggregate(
    verdicts: Sequence[JudgeVerdict],
    items: Sequence[BenchmarkItem],
    *,
    unscored: int = 0,
) -> CapabilityScorecard:
    """Micro-averaged means: every domain mean is a per-question mean.

    Scores are summed as integers, so the result is exactly permutation
    invariant and overall equals the count-weighted blend of the domains.
    """
    by_id = {item.item_id: item for item in items}
    sums = {cap: 0 for cap in CAPABILITIES}
    counts = {cap: 0 for cap in CAPABILITIES}
    for verdict in verdicts:
        item = by_id.get(verdict.item_id)
        if item is None:
            raise IntegrityError(f"verdict for unknown item_id {verdict.item_id!r}")
        sums[item.l2_capability] += verdict.score
        counts[item.l2_capability] += 1

    def mean_over(caps: Iterable[str]) -> float | None:
        total = sum(sums[c] for c in caps)
        count = sum(counts[c] for c in caps)
        return total / count if count else None

    return CapabilityScorecard(
        per_capability_mean={cap: mean_over([cap]) for cap in CAPABILITIES},
        item_counts=dict(counts),
        perception_mean=mean_over(PERCEPTION_CAPABILITIES),
        reasoning_mean=mean_over(REASONING_CAPABILITIES),
        overall_mean=mean_over(CAPABILITIES),
        scored_count=sum(counts.values()),
        unscored=unscored,
    )


@dataclass
class EvalRunResult:
    scorecard: CapabilityScorecard
    verdicts: list[JudgeVerdict]
    answers: dict[str, AnswerRecord]
    unscored_items: list[str] = field(default_factory=list)


def run_eval(
    items: Sequence[BenchmarkItem],
    store_for: Callable[[str], KnowledgeStore],
    *,
    embedder: EmbeddingProvider,
    generator: TextProvider,
    judge_provider: TextProvider,
    k: int = 5,
    template: PromptTemplate | None = None,
    reasks: int = JUDGE_REASKS,
) -> EvalRunResult:
    """Answer and judge every item; unparsable judgments are tallied, not fatal."""
    verdicts: list[JudgeVerdict] = []
    answers: dict[str, AnswerRecord] = {}
    unscored: list[str] = []
    for item in items:
        store = store_for(item.video_id)
        record = answer(
            item.question,
            store,
            embedder=embedder,
            generator=generator,
            k=k,
            template=template,
        )
        answers[item.item_id] = record
        try:
            verdicts.append(
                judge(
                    item.question,
                    item.ground_truth,
                    record.answer,
                    judge_provider,
                    item_id=item.item_id,
                    reasks=reasks,
                )
            )
        except ScoringError:
            unscored.append(item.item_id)
    scorecard = aggregate(verdicts, items, unscored=len(unscored))
    return EvalRunResult(scorecard, verdicts, answers, unscored)


def ablation_label(toggles: Iterable[str]) -> str:
    """Row label for a toggle set, matching the ablation table wording."""
    chosen = [t for t in ABLATION_TOGGLES if t in set(toggles)]
    unknown = set(toggles) - set(ABLATION_TOGGLES)
    if unknown:
        raise InvalidInputError(f"unknown ablation toggles: {sorted(unknown)}")
    if not chosen:
        return "Multi-RAG"
    parts = {"audio": "Audio", "auxiliary_metadata": "Auxiliary metadata"}
    return "Multi-RAG w/o " + " & ".join(parts[t] for t in chosen)


def toggles_to_excluded_kinds(toggles: Iterable[str]) -> tuple[str, ...]:
    """Chunk kinds a toggle set removes at chunking time."""
    unknown = set(toggles) - set(ABLATION_TOGGLES)
    if unknown:
        raise InvalidInputError(f"unknown ablation toggles: {sorted(unknown)}")
    kinds: list[str] = []
    for toggle in ABLATION_TOGGLES:
        if toggle in set(toggles):
            kinds.extend(TOGGLE_KINDS[toggle])
    return tuple(kinds)


@dataclass(frozen=True)
class LabeledScorecard:
    label: str
    scorecard: CapabilityScorecard


DEFAULT_ABLATION_SETS: tuple[tuple[str, ...], ...] = (
    (),
    ("audio",),
    ("auxiliary_metadata",),
    ("audio", "auxiliary_metadata"),
)


def run_ablation(
    items: Sequence[BenchmarkItem],
    build_store_for: Callable[[tuple[str, ...]], Callable[[str], KnowledgeStore]],
    *,
    toggle_sets: Sequence[Sequence[str]] = DEFAULT_ABLATION_SETS,
    embedder: EmbeddingProvider,
    generator: TextProvider,
    judge_provider: TextProvider,
    k: int = 5,
    template: PromptTemplate | None = None,
) -> list[LabeledScorecard]:
    """One scorecard per toggle set, stores rebuilt with kinds excluded."""
    out: list[LabeledScorecard] = []
    for toggles in toggle_sets:
        toggles = tuple(toggles)
        store_for = build_store_for(toggles_to_excluded_kinds(toggles))
        result = run_eval(
            items,
            store_for,
            embedder=embedder,
            generator=generator,
            judge_provider=judge_provider,
            k=k,
            template=template,
        )
        out.append(LabeledScorecard(ablation_label(toggles), result.scorecard))
    return out


def run_topk_sweep(
    items: Sequence[BenchmarkItem],
    store_for: Callable[[str], KnowledgeStore],
    *,
    ks: Sequence[int] = DEFAULT_TOPK_SWEEP,
    embedder: EmbeddingProvider,
    generator: TextProvider,
    judge_provider: TextProvider,
    template: PromptTemplate | None = None,
) -> list[LabeledScorecard]:
    """One scorecard per retrieval depth, labeled Top-<k>."""
    out: list[LabeledScorecard] = []
    for k in ks:
        if k < 1:
            raise InvalidInputError("sweep k values must be at least 1")
        result = run_eval(
            items,
            store_for,
            embedder=embedder,
            generator=generator,
            judge_provider=judge_provider,
            k=k,
            template=template,
        )
        out.append(LabeledScorecard(f"Top-{k}", result.scorecard))
    return out


# Report rendering.  Column order follows the capability table: Overall,
# the four Perception capabilities and their mean, then the five
# Reasoning capabilities and their mean.

REPORT_COLUMNS = (
    ("Overall", lambda s: s.overall_mean),
    ("CP", lambda s: s.per_capability_mean["CP"]),
    ("FP-S", lambda s: s.per_capability_mean["FP-S"]),
    ("FP-C", lambda s: s.per_capability_mean["FP-C"]),
    ("HL", lambda s: s.per_capability_mean["HL"]),
    ("Percep.", lambda s: s.perception_mean),
    ("LR", lambda s: s.per_capability_mean["LR"]),
    ("AR", lambda s: s.per_capability_mean["AR"]),
    ("RR", lambda s: s.per_capability_mean["RR"]),
    ("CSR", lambda s: s.per_capability_mean["CSR"]),
    ("TR", lambda s: s.per_capability_mean["TR"]),
    ("Reason.", lambda s: s.reasoning_mean),
)


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.2f}"


def render_text_report(rows: Sequence[LabeledScorecard], metadata: Mapping[str, object]) -> str:
    """Aligned plain-text scorecard table with a metadata preamble."""
    lines = [f"{key}: {metadata[key]}" for key in sorted(metadata)]
    if lines:
        lines.append("")
    label_width = max([len("Method")] + [len(r.label) for r in rows])
    headers = ["Method".ljust(label_width)] + [name.rjust(7) for name, _ in REPORT_COLUMNS]
    headers.append("Unscored".rjust(9))
    lines.append("  ".join(headers))
    lines.append("-" * len(lines[-1]))
    for row in rows:
        cells = [row.label.ljust(label_width)]
        cells += [_fmt(getter(row.scorecard)).rjust(7) for _, getter in REPORT_COLUMNS]
        cells.append(str(row.scorecard.unscored).rjust(9))
        lines.append("  ".join(cells))
    return "\n".join(lines) + "\n"


def scorecard_to_dict(card: CapabilityScorecard) -> dict:
    return {
        "per_capability_mean": dict(card.per_capability_mean),
        "item_counts": dict(card.item_counts),
        "perception_mean": card.perception_mean,
        "reasoning_mean": card.reasoning_mean,
        "overall_mean": card.overall_mean,
        "scored_count": card.scored_count,
        "unscored": card.unscored,
    }


def render_json_report(rows: Sequence[LabeledScorecard], metadata: Mapping[str, object]) -> str:
    payload = {
        "run": dict(metadata),
        "rows": [
            {"label": row.label, "scorecard": scorecard_to_dict(row.scorecard)}
            for row in rows
        ],
    }
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n"
