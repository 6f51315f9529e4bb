"""SQuAD-format dataset model: parsing, validation, serialization, and
answer-offset remapping under context rewrites.

All offsets are codepoint offsets (Python string indices), never bytes.
Values are immutable after construction and safe to share between threads.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping


class DatasetError(Exception):
    """Base class for corpus errors."""


class DatasetParseError(DatasetError):
    def __init__(self, message: str, byte_offset: int | None = None):
        if byte_offset is not None:
            message = f"{message} (byte offset {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


class DatasetValidationError(DatasetError):
    pass


class SpanIntegrityError(DatasetValidationError):
    def __init__(self, qa_id: str, message: str):
        super().__init__(f"QA {qa_id!r}: {message}")
        self.qa_id = qa_id


class SpanProtectionError(DatasetError):
    """An answer span overlaps a rewritten region of the context."""


PERTURBATION_TYPES = ("char", "word", "para", "none")
PERTURBATION_AMOUNTS = ("none", "half", "full", "both")

# Namespaced key for perturbation metadata; standard SQuAD consumers
# ignore it on round trip.
PERTURBATION_KEY = "x_perturbation"


@dataclass(frozen=True)
class PerturbationMeta:
    type: str
    amount: str

    def __post_init__(self):
        if self.type not in PERTURBATION_TYPES:
            raise DatasetValidationError(f"unknown perturbation type {self.type!r}")
        if self.amount not in PERTURBATION_AMOUNTS:
            raise DatasetValidationError(f"unknown perturbation amount {self.amount!r}")


@dataclass(frozen=True)
class AnswerSpan:
    text: str
    answer_start: int
    extra: Mapping[str, Any] = field(default_factory=dict)

    @property
    def answer_end(self) -> int:
        return self.answer_start + len(self.text)


@dataclass(frozen=True)
class QA:
    id: str
    question: str
    answers: tuple[AnswerSpan, ...]
    is_perturbed: bool = False
    perturbation_meta: PerturbationMeta | None = None
    extra: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Paragraph:
    context: str
    qas: tuple[QA, ...]
    extra: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Article:
    title: str
    paragraphs: tuple[Paragraph, ...]
    extra: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Dataset:
    version: str
    articles: tuple[Article, ...]
    extra: Mapping[str, Any] = field(default_factory=dict)
    # Count of QAs dropped at parse time because their answer text has no
    # evidence in the context (pre-converted TriviaQA artifacts). Not part
    # of structural equality.
    dropped_without_evidence: int = field(default=0, compare=False)

    def paragraphs(self) -> Iterable[tuple[int, Paragraph]]:
        """All paragraphs with a dataset-wide index, in document order."""
        i = 0
        for article in self.articles:
            for paragraph in article.paragraphs:
                yield i, paragraph
                i += 1

    def qa_count(self) -> int:
        return sum(len(p.qas) for _, p in self.paragraphs())


def validate_dataset(d: Dataset) -> None:
    """Check all structural invariants; raises DatasetValidationError."""
    seen_ids: set[str] = set()
    for _, paragraph in d.paragraphs():
        if not paragraph.context:
            raise DatasetValidationError("paragraph has empty context")
        if not paragraph.qas:
            raise DatasetValidationError("paragraph has no QA entries")
        for qa in paragraph.qas:
            if qa.id in seen_ids:
                raise DatasetValidationError(f"duplicate QA id {qa.id!r}")
            seen_ids.add(qa.id)
            for ans in qa.answers:
                _check_span(paragraph.context, qa.id, ans)


def _check_span(context: str, qa_id: str, ans: AnswerSpan) -> None:
    if ans.answer_start < 0 or ans.answer_end > len(context):
        raise SpanIntegrityError(
            qa_id, f"answer span [{ans.answer_start}, {ans.answer_end}) "
                   f"outside context of length {len(context)}")
    extracted = context[ans.answer_start:ans.answer_end]
    if extracted != ans.text:
        raise SpanIntegrityError(
            qa_id, f"span at {ans.answer_start} extracts {extracted!r}, "
                   f"expected {ans.text!r}")


def parse_dataset(raw: bytes | str, drop_unlocatable: bool = True) -> Dataset:
    """Parse SQuAD v1.1 JSON bytes into a validated Dataset.

    QAs whose answer text cannot be found anywhere in the context are
    dropped (counted in ``dropped_without_evidence``) when
    ``drop_unlocatable`` is set; an answer whose text *is* present but
    whose offset is wrong raises SpanIntegrityError instead.
    """
    if isinstance(raw, bytes):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DatasetParseError(f"not valid UTF-8: {exc}", exc.start) from exc
    else:
        text = raw
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        byte_offset = len(text[:exc.pos].encode("utf-8"))
        raise DatasetParseError(f"malformed JSON: {exc.msg}", byte_offset) from exc

    if not isinstance(doc, dict) or "data" not in doc:
        raise DatasetParseError('missing top-level "data" array')
    if not isinstance(doc["data"], list):
        raise DatasetParseError('"data" is not an array')

    dropped = 0
    articles = []
    for art in doc["data"]:
        paragraphs = []
        for para in art.get("paragraphs", []):
            if "context" not in para:
                raise DatasetParseError('paragraph missing "context"')
            if "qas" not in para:
                raise DatasetParseError('paragraph missing "qas"')
            context = para["context"]
            qas = []
            for qa_doc in para["qas"]:
                qa = _parse_qa(qa_doc)
                if drop_unlocatable and qa.answers and all(
                        a.text not in context for a in qa.answers):
                    dropped += 1
                    continue
                qas.append(qa)
            if not qas and para["qas"]:
                # Every QA of this paragraph lacked evidence; drop it whole
                # rather than violate the >=1-QA invariant.
                continue
            paragraphs.append(Paragraph(
                context=context,
                qas=tuple(qas),
                extra=_extras(para, ("context", "qas")),
            ))
        articles.append(Article(
            title=art.get("title", ""),
            paragraphs=tuple(paragraphs),
            extra=_extras(art, ("title", "paragraphs")),
        ))

    dataset = Dataset(
        version=str(doc.get("version", "")),
        articles=tuple(articles),
        extra=_extras(doc, ("version", "data")),
        dropped_without_evidence=dropped,
    )
    validate_dataset(dataset)
    return dataset


def _parse_qa(qa_doc: Mapping[str, Any]) -> QA:
    for key in ("id", "question"):
        if key not in qa_doc:
            raise DatasetParseError(f'QA record missing "{key}"')
    answers = []
    for ans in qa_doc.get("answers", []):
        if "text" not in ans or "answer_start" not in ans:
            raise DatasetParseError(
                f'answer of QA {qa_doc["id"]!r} missing "text"/"answer_start"')
        answers.append(AnswerSpan(
            text=ans["text"],
            answer_start=int(ans["answer_start"]),
            extra=_extras(ans, ("text", "answer_start")),
        ))
    meta_doc = qa_doc.get(PERTURBATION_KEY)
    meta = None
    is_perturbed = False
    if meta_doc is not None:
        meta = PerturbationMeta(type=meta_doc["type"], amount=meta_doc["amount"])
        is_perturbed = bool(meta_doc.get("perturbed", False))
    return QA(
        id=str(qa_doc["id"]),
        question=qa_doc["question"],
        answers=tuple(answers),
        is_perturbed=is_perturbed,
        perturbation_meta=meta,
        extra=_extras(qa_doc, ("id", "question", "answers", PERTURBATION_KEY)),
    )


def _extras(doc: Mapping[str, Any], known: tuple[str, ...]) -> dict[str, Any]:
    return {k: v for k, v in doc.items() if k not in known}


def serialize_dataset(d: Dataset) -> bytes:
    """Dataset back to SQuAD-format UTF-8 JSON; inverse of parse_dataset."""
    doc: dict[str, Any] = {"version": d.version, "data": []}
    for article in d.articles:
        art_doc: dict[str, Any] = {"title": article.title, "paragraphs": []}
        for paragraph in article.paragraphs:
            para_doc: dict[str, Any] = {
                "context": paragraph.context,
                "qas": [_qa_to_doc(qa) for qa in paragraph.qas],
            }
            para_doc.update(paragraph.extra)
            art_doc["paragraphs"].append(para_doc)
        art_doc.update(article.extra)
        doc["data"].append(art_doc)
    doc.update(d.extra)
    return json.dumps(doc, ensure_ascii=False).encode("utf-8")


def _qa_to_doc(qa: QA) -> dict[str, Any]:
    qa_doc: dict[str, Any] = {
        "id": qa.id,
        "question": qa.question,
        "answers": [
            {"text": a.text, "answer_start": a.answer_start, **a.extra}
            for a in qa.answers
        ],
    }
    if qa.perturbation_meta is not None:
        qa_doc[PERTURBATION_KEY] = {
            "type": qa.perturbation_meta.type,
            "amount": qa.perturbation_meta.amount,
            "perturbed": qa.is_perturbed,
        }
    qa_doc.update(qa.extra)
    return qa_doc


# ---------------------------------------------------------------------------
# Offset maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    """Maps original codepoint range to its range in the rewritten text.

    ``identical`` means the rewritten range holds exactly the original
    text (same length, same codepoints), so offsets map by a constant
    shift inside it.
    """
    orig_start: int
    orig_end: int
    new_start: int
    new_end: int
    identical: bool

    @property
    def shift(self) -> int:
        return self.new_start - self.orig_start


class OffsetMap:
    """Piecewise map from original to rewritten codepoint offsets.

    Segments are sorted, non-overlapping, and jointly cover the whole
    original text. Answer spans may only be remapped through identical
    segments.
    """

    def __init__(self, segments: Iterable[Segment], orig_length: int):
        self.segments = _normalize_segments(tuple(segments), orig_length)
        self.orig_length = orig_length

    @classmethod
    def identity(cls, length: int) -> "OffsetMap":
        if length == 0:
            return cls((), 0)
        return cls((Segment(0, length, 0, length, True),), length)

    @classmethod
    def from_replacements(
        cls, original: str, replacements: list[tuple[int, int, str]],
    ) -> tuple[str, "OffsetMap"]:
        """Apply sorted, non-overlapping (start, end, new_text) rewrites.

        Returns the rewritten string plus the map. A replacement whose text
        equals the original slice yields an identical segment.
        """
        segments: list[Segment] = []
        out: list[str] = []
        cursor = 0
        new_cursor = 0
        for start, end, new_text in replacements:
            if start < cursor or end > len(original) or start > end:
                raise ValueError(
                    f"replacement [{start}, {end}) out of order or out of bounds")
            if start > cursor:
                gap = original[cursor:start]
                segments.append(Segment(cursor, start, new_cursor,
                                        new_cursor + len(gap), True))
                out.append(gap)
                new_cursor += len(gap)
            identical = new_text == original[start:end]
            segments.append(Segment(start, end, new_cursor,
                                    new_cursor + len(new_text), identical))
            out.append(new_text)
            new_cursor += len(new_text)
            cursor = end
        if cursor < len(original):
            tail = original[cursor:]
            segments.append(Segment(cursor, len(original), new_cursor,
                                    new_cursor + len(tail), True))
            out.append(tail)
        return "".join(out), cls(segments, len(original))

    def map_span(self, start: int, end: int) -> int:
        """New start offset for an original span that lies in protected text."""
        for seg in self.segments:
            if seg.orig_start <= start and end <= seg.orig_end:
                if not seg.identical:
                    raise SpanProtectionError(
                        f"span [{start}, {end}) lies in rewritten segment "
                        f"[{seg.orig_start}, {seg.orig_end})")
                return start + seg.shift
        raise SpanProtectionError(
            f"span [{start}, {end}) crosses a rewritten boundary")

    def compose(self, other: "OffsetMap") -> "OffsetMap":
        """Map equivalent to applying self, then other."""
        composed: list[Segment] = []
        for seg in self.segments:
            if not seg.identical:
                composed.append(Segment(
                    seg.orig_start, seg.orig_end,
                    other._project_floor(seg.new_start),
                    other._project_ceil(seg.new_end),
                    False,
                ))
                continue
            for piece in other._pieces(seg.new_start, seg.new_end):
                c, d, new_c, new_d, identical = piece
                composed.append(Segment(
                    seg.orig_start + (c - seg.new_start),
                    seg.orig_start + (d - seg.new_start),
                    new_c, new_d, identical,
                ))
        return OffsetMap(composed, self.orig_length)

    def _pieces(self, start: int, end: int):
        """Split [start, end) of this map's *original* axis on segment
        boundaries, yielding (a, b, new_a, new_b, identical) pieces."""
        for seg in self.segments:
            a = max(start, seg.orig_start)
            b = min(end, seg.orig_end)
            if a >= b:
                continue
            if seg.identical:
                yield a, b, a + seg.shift, b + seg.shift, True
            else:
                yield a, b, seg.new_start, seg.new_end, False

    def _project_floor(self, pos: int) -> int:
        for seg in self.segments:
            if seg.orig_start <= pos < seg.orig_end:
                return pos + seg.shift if seg.identical else seg.new_start
        return self._new_length()

    def _project_ceil(self, pos: int) -> int:
        for seg in self.segments:
            if seg.orig_start < pos <= seg.orig_end:
                return pos + seg.shift if seg.identical else seg.new_end
        return 0 if pos <= 0 else self._new_length()

    def _new_length(self) -> int:
        return self.segments[-1].new_end if self.segments else 0


def _normalize_segments(segments: tuple[Segment, ...], orig_length: int,
                        ) -> tuple[Segment, ...]:
    ordered = sorted(segments, key=lambda s: s.orig_start)
    cursor = 0
    merged: list[Segment] = []
    for seg in ordered:
        if seg.orig_start != cursor:
            raise ValueError(
                f"segments leave gap/overlap at original offset {cursor}")
        if seg.identical and seg.new_end - seg.new_start != seg.orig_end - seg.orig_start:
            raise ValueError("identical segment with mismatched lengths")
        prev = merged[-1] if merged else None
        if (prev is not None and prev.identical and seg.identical
                and prev.shift == seg.shift and prev.new_end == seg.new_start):
            merged[-1] = replace(prev, orig_end=seg.orig_end, new_end=seg.new_end)
        else:
            merged.append(seg)
        cursor = seg.orig_end
    if cursor != orig_length:
        raise ValueError(
            f"segments cover up to {cursor}, original length is {orig_length}")
    return tuple(merged)


def remap_answers(qas: Iterable[QA], offset_map: OffsetMap,
                  rewritten_context: str | None = None) -> list[QA]:
    """Remap every answer offset through the map; text is never changed.

    Raises SpanProtectionError if any answer overlaps a rewritten segment.
    When the rewritten context is supplied, span extraction is re-verified
    against it.
    """
    remapped = []
    for qa in qas:
        new_answers = []
        for ans in qa.answers:
            try:
                new_start = offset_map.map_span(ans.answer_start, ans.answer_end)
            except SpanProtectionError as exc:
                raise SpanProtectionError(f"QA {qa.id!r}: {exc}") from exc
            new_ans = replace(ans, answer_start=new_start)
            if rewritten_context is not None:
                _check_span(rewritten_context, qa.id, new_ans)
            new_answers.append(new_ans)
        remapped.append(replace(qa, answers=tuple(new_answers)))
    return remapped
