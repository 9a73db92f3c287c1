"""Answer questions over a knowledge store with templated generation.

Pipeline per question: embed the query, retrieve top-k chunks, build a
context block in descending-similarity order, fill one of the two shipped
prompt templates, and call the generation provider.  Stateless per call.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .assets import load_asset
from .encoder import format_hms
from .errors import InvalidInputError, ProviderError, StageError
from .providers.base import EmbeddingProvider, TextProvider
from .store import KnowledgeStore, RetrievalHit

DEFAULT_K = 5
DEFAULT_PROMPT_TYPE = "type2"

PROMPT_ASSETS = {"type1": "prompt_type1.txt", "type2": "prompt_type2.txt"}

_SLOT_RE = re.compile(r"\{context\}|\{question\}")


@dataclass(frozen=True)
class PromptTemplate:
    template_type: str
    body: str

    def __post_init__(self) -> None:
        if self.template_type not in PROMPT_ASSETS:
            raise InvalidInputError(f"unknown template type {self.template_type!r}")
        for slot in ("{context}", "{question}"):
            if self.body.count(slot) != 1:
                raise InvalidInputError(f"template body must contain {slot} exactly once")

    def fill(self, context: str, question: str) -> str:
        """Substitute both slots in one pass, so slot-like text in the
        context or question is never expanded again."""
        values = {"{context}": context, "{question}": question}
        return _SLOT_RE.sub(lambda m: values[m.group(0)], self.body)


def load_template(template_type: str = DEFAULT_PROMPT_TYPE, path: str | Path | None = None) -> PromptTemplate:
    """Load a shipped template by type, or an override from a file."""
    if path is not None:
        body = Path(path).read_text(encoding="utf-8")
        return PromptTemplate(template_type, body)
    asset = PROMPT_ASSETS.get(template_type)
    if asset is None:
        raise InvalidInputError(f"unknown template type {template_type!r}")
    return PromptTemplate(template_type, load_asset(asset))


def build_context(hits: Sequence[RetrievalHit], store: KnowledgeStore) -> str:
    """Concatenate hit chunks, highest similarity first, with id headers."""
    blocks = []
    for hit in hits:
        chunk = store.get_chunk(hit.chunk_id)
        if chunk.time_range is not None:
            lo, hi = chunk.time_range
            header = f"[doc {chunk.doc_id} | {format_hms(lo)}–{format_hms(hi)} | {chunk.kind}]"
        else:
            header = f"[doc {chunk.doc_id} | {chunk.kind}]"
        blocks.append(f"{header}\n{chunk.text}")
    return "\n\n".join(blocks)


@dataclass(frozen=True)
class AnswerRecord:
    question: str
    retrieved: tuple[RetrievalHit, ...]
    prompt_type: str
    answer: str
    k: int
    latency_ms: float
    model_name: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "retrieved", tuple(self.retrieved))
        if len(self.retrieved) > self.k:
            raise InvalidInputError("retrieved more hits than k")


def answer(
    question: str,
    store: KnowledgeStore,
    *,
    embedder: EmbeddingProvider,
    generator: TextProvider,
    k: int = DEFAULT_K,
    template: PromptTemplate | None = None,
) -> AnswerRecord:
    """Run the retrieve-then-generate pipeline for one question."""
    if not question or not question.strip():
        raise InvalidInputError("question must be non-empty")
    if k < 1:
        raise InvalidInputError("k must be at least 1")
    if template is None:
        template = load_template()
    started = time.perf_counter()
    try:
        qvec = embedder.embed_texts([question])[0]
    except ProviderError as exc:
        raise StageError("embed", str(exc)) from exc
    hits = tuple(store.query(qvec, k))
    context = build_context(hits, store)
    prompt = template.fill(context, question)
    try:
        text = generator.generate(prompt)
    except ProviderError as exc:
        raise StageError("generate", str(exc)) from exc
    if not text.strip():
        raise StageError("generate", "provider returned an empty answer")
    latency_ms = (time.perf_counter() - started) * 1000.0
    return AnswerRecord(
        question=question,
        retrieved=hits,
        prompt_type=template.template_type,
        answer=text,
        k=k,
        latency_ms=latency_ms,
        model_name=generator.config.model_name,
    )


def speculative_flag(answer_text: str) -> str:
    """Classify a type-2 answer by its literal self-labeling."""
    if answer_text.startswith("Speculative --"):
        return "speculative"
    if answer_text == "Unknown.":
        return "unknown"
    return "evidence_based"


def record_to_dict(record: AnswerRecord) -> dict:
    return {
        "question": record.question,
        "retrieved": [
            {"chunk_id": h.chunk_id, "similarity": h.similarity, "rank": h.rank}
            for h in record.retrieved
        ],
        "prompt_type": record.prompt_type,
        "answer": record.answer,
        "k": record.k,
        "latency_ms": record.latency_ms,
        "model_name": record.model_name,
    }


def append_audit(record: AnswerRecord, path: str | Path) -> None:
    """Append one answer record to a JSON-Lines audit log."""
    line = json.dumps(record_to_dict(record), ensure_ascii=False, sort_keys=True)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line + "\n")
