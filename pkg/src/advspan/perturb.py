"""Character-, word-, and sentence-level context perturbation with
answer-span protection, plus the none/half/full/both dataset variants.

Randomness: one deterministic generator per paragraph, derived from the
run seed and the dataset-wide paragraph index by a SplitMix64 mix feeding
a Mersenne Twister. The derivation is part of the output contract and is
stable across releases; bit-identity with other languages is a non-goal.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping

from .confusables import ConfusableTable
from .corpus import (
    Article, Dataset, OffsetMap, Paragraph, PerturbationMeta, QA,
    SpanProtectionError, remap_answers, validate_dataset,
)
from .embeddings import EmbeddingStore
from .textops import Token, split_sentences, tokenize

PERTURB_TYPES = ("char", "word", "para")
AMOUNTS = ("none", "half", "full", "both")


@dataclass(frozen=True)
class PerturbationSpec:
    type: str
    amount: str = "full"
    rate: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.type not in PERTURB_TYPES:
            raise ValueError(f"perturbation type must be one of {PERTURB_TYPES}")
        if self.amount not in AMOUNTS:
            raise ValueError(f"amount must be one of {AMOUNTS}")
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("rate must lie in [0, 1]")


@dataclass
class PerturbationResources:
    """Whatever the perturbation type needs: a confusable table for char,
    an embedding store for word, external paraphrase sets for para."""
    table: ConfusableTable | None = None
    store: EmbeddingStore | None = None
    paraphrases: Mapping[int, Mapping[int, str]] = field(default_factory=dict)


class ProtectedRegions:
    """Sorted, merged codepoint intervals that must never change."""

    def __init__(self, intervals: Iterable[tuple[int, int]]):
        merged: list[tuple[int, int]] = []
        for start, end in sorted(intervals):
            if merged and start <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], end))
            else:
                merged.append((start, end))
        self.intervals = tuple(merged)

    @classmethod
    def from_paragraph(cls, paragraph: Paragraph) -> "ProtectedRegions":
        """Union of every gold-answer span of every QA in the paragraph."""
        spans = [(a.answer_start, a.answer_end)
                 for qa in paragraph.qas for a in qa.answers]
        return cls(spans)

    def contains(self, pos: int) -> bool:
        return any(s <= pos < e for s, e in self.intervals)

    def intersects(self, start: int, end: int) -> bool:
        return any(s < end and start < e for s, e in self.intervals)


_MASK64 = (1 << 64) - 1


def _mix64(x: int) -> int:
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def paragraph_seed(seed: int, paragraph_index: int) -> int:
    """Derived seed for one paragraph's generator. The derivation constant
    also reserves a separate stream for the half-variant selection."""
    return _mix64(seed + 0x9E3779B97F4A7C15 * (paragraph_index + 2))


def _perturbation_count(rate: float, eligible: int) -> int:
    return min(math.ceil(rate * eligible), eligible)


def perturb_chars(
    context: str,
    prot: ProtectedRegions,
    table: ConfusableTable,
    rate: float,
    seed: int,
) -> tuple[str, OffsetMap]:
    """Replace ceil(rate * |eligible|) unprotected codepoints with a
    confusable alternative each. One-for-one substitution keeps every
    codepoint offset in place, so the map is the identity on offsets."""
    rng = random.Random(seed)
    eligible = [i for i, ch in enumerate(context)
                if table.alternatives(ord(ch)) and not prot.contains(i)]
    count = _perturbation_count(rate, len(eligible))
    if count == 0:
        return context, OffsetMap.identity(len(context))
    positions = sorted(rng.sample(eligible, count))
    replacements = []
    for pos in positions:
        alts = table.alternatives(ord(context[pos]))
        replacements.append((pos, pos + 1, chr(rng.choice(alts))))
    return OffsetMap.from_replacements(context, replacements)


def _apply_casing(original: str, replacement: str) -> str:
    if original.islower():
        return replacement.lower()
    if original.isupper() and len(original) > 1:
        return replacement.upper()
    if original[:1].isupper():
        return replacement.capitalize()
    return replacement


def perturb_words(
    context: str,
    prot: ProtectedRegions,
    store: EmbeddingStore,
    rate: float,
    seed: int,
) -> tuple[str, OffsetMap]:
    """Replace ceil(rate * |eligible|) unprotected in-vocabulary tokens
    with their nearest embedding neighbor, re-applying the original
    token's casing pattern. A token is never replaced by itself."""
    rng = random.Random(seed)
    distinct_lower = {w.lower() for w in store.words}
    if len(distinct_lower) < 2:
        return context, OffsetMap.identity(len(context))
    eligible = [t for t in tokenize(context)
                if t.text.isalpha()
                and not prot.intersects(t.start, t.end)
                and t.text.lower() in store.index]
    count = _perturbation_count(rate, len(eligible))
    if count == 0:
        return context, OffsetMap.identity(len(context))
    chosen = sorted(rng.sample(range(len(eligible)), count))
    replacements = []
    for idx in chosen:
        token = eligible[idx]
        replacements.append(
            (token.start, token.end, _nearest_distinct(store, token)))
    return OffsetMap.from_replacements(context, replacements)


def _nearest_distinct(store: EmbeddingStore, token: Token) -> str:
    """Nearest neighbor whose re-cased form differs from the token."""
    k = 2
    while True:
        for word, _ in store.nearest_neighbor(token.text.lower(), k):
            recased = _apply_casing(token.text, word)
            if recased != token.text:
                return recased
        if k >= len(store):
            raise ValueError(
                f"no distinct neighbor for {token.text!r} in vocabulary")
        k = min(k * 4, len(store))


def apply_paraphrases(
    context: str,
    prot: ProtectedRegions,
    paraphrases: Mapping[int, str],
) -> tuple[str, OffsetMap]:
    """Substitute externally produced replacements for whole sentences.

    Only sentences that do not intersect a protected region may be
    replaced. Text between sentences is preserved verbatim so that an
    empty paraphrase set is exactly the identity.
    """
    if not paraphrases:
        return context, OffsetMap.identity(len(context))
    sentences = split_sentences(context)
    replacements = []
    for idx in sorted(paraphrases):
        if not 0 <= idx < len(sentences):
            raise ValueError(
                f"paraphrase for sentence {idx}, context has {len(sentences)}")
        start, end = sentences[idx]
        if prot.intersects(start, end):
            raise SpanProtectionError(
                f"paraphrase targets protected sentence {idx} "
                f"[{start}, {end})")
        replacements.append((start, end, paraphrases[idx]))
    return OffsetMap.from_replacements(context, replacements)


def perturb_paragraph(
    paragraph: Paragraph,
    spec: PerturbationSpec,
    resources: PerturbationResources,
    paragraph_index: int,
) -> Paragraph:
    """Perturb one paragraph's context and remap its answers."""
    prot = ProtectedRegions.from_paragraph(paragraph)
    seed = paragraph_seed(spec.seed, paragraph_index)
    if spec.type == "char":
        if resources.table is None:
            raise ValueError("char perturbation needs a confusable table")
        new_context, offset_map = perturb_chars(
            paragraph.context, prot, resources.table, spec.rate, seed)
    elif spec.type == "word":
        if resources.store is None:
            raise ValueError("word perturbation needs an embedding store")
        new_context, offset_map = perturb_words(
            paragraph.context, prot, resources.store, spec.rate, seed)
    else:
        new_context, offset_map = apply_paraphrases(
            paragraph.context, prot,
            resources.paraphrases.get(paragraph_index, {}))
    qas = remap_answers(paragraph.qas, offset_map, new_context)
    return replace(paragraph, context=new_context, qas=tuple(qas))


def _mark(qa: QA, spec: PerturbationSpec, amount: str, perturbed: bool,
          id_suffix: str = "") -> QA:
    return replace(
        qa,
        id=qa.id + id_suffix,
        is_perturbed=perturbed,
        perturbation_meta=PerturbationMeta(type=spec.type, amount=amount),
    )


def make_variant(
    d: Dataset,
    spec: PerturbationSpec,
    resources: PerturbationResources,
) -> Dataset:
    """Build the none/half/full/both variant of a dataset.

    none: untouched copy, every QA tagged amount=none.
    half: a seeded floor(n/2)-paragraph subset perturbed; only those QAs
          carry perturbation metadata.
    full: every paragraph perturbed.
    both: the clean dataset followed by the fully perturbed dataset, the
          perturbed QA ids suffixed "-p".
    """
    paragraph_count = sum(1 for _ in d.paragraphs())

    if spec.amount == "none":
        articles = _map_paragraphs(
            d, lambda i, p: replace(p, qas=tuple(
                _mark(qa, spec, "none", False) for qa in p.qas)))
        out = replace(d, articles=articles)
    elif spec.amount in ("half", "full"):
        if spec.amount == "half":
            selector = random.Random(_mix64(spec.seed + 0x9E3779B97F4A7C15))
            selected = set(selector.sample(
                range(paragraph_count), paragraph_count // 2))
        else:
            selected = set(range(paragraph_count))

        def transform(i: int, p: Paragraph) -> Paragraph:
            if i not in selected:
                return p
            perturbed = perturb_paragraph(p, spec, resources, i)
            return replace(perturbed, qas=tuple(
                _mark(qa, spec, spec.amount, True) for qa in perturbed.qas))

        out = replace(d, articles=_map_paragraphs(d, transform))
    else:  # both
        def transform(i: int, p: Paragraph) -> Paragraph:
            perturbed = perturb_paragraph(p, spec, resources, i)
            return replace(perturbed, qas=tuple(
                _mark(qa, spec, "both", True, id_suffix="-p")
                for qa in perturbed.qas))

        perturbed_articles = _map_paragraphs(d, transform)
        out = replace(d, articles=d.articles + perturbed_articles)
    validate_dataset(out)
    return out


def _map_paragraphs(d: Dataset, fn) -> tuple[Article, ...]:
    articles = []
    index = 0
    for article in d.articles:
        paragraphs = []
        for paragraph in article.paragraphs:
            paragraphs.append(fn(index, paragraph))
            index += 1
        articles.append(replace(article, paragraphs=tuple(paragraphs)))
    return tuple(articles)


# ---------------------------------------------------------------------------
# Paraphrase-set interchange (JSON Lines)
# ---------------------------------------------------------------------------

def load_paraphrase_sets(raw: bytes | str) -> dict[int, dict[int, str]]:
    """One record per paragraph:
    {"paragraph_index": int, "sentences": {"<idx>": "<replacement>"}}"""
    text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    sets: dict[int, dict[int, str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            paragraph_index = int(record["paragraph_index"])
            sentences = {int(k): str(v) for k, v in record["sentences"].items()}
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"paraphrase set line {lineno}: {exc}") from exc
        sets[paragraph_index] = sentences
    return sets


def dump_paraphrase_sets(sets: Mapping[int, Mapping[int, str]]) -> str:
    lines = []
    for paragraph_index in sorted(sets):
        lines.append(json.dumps({
            "paragraph_index": paragraph_index,
            "sentences": {str(k): v for k, v in sorted(sets[paragraph_index].items())},
        }, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Estimator-style wrapper
# ---------------------------------------------------------------------------

class DatasetPerturber:
    """Stateless transformer over datasets, estimator-style.

    Parameters mirror PerturbationSpec; resources are supplied once at
    construction. ``transform`` maps a Dataset to its perturbed variant.
    """

    def __init__(self, perturbation: str = "char", amount: str = "full",
                 rate: float = 0.25, seed: int = 0,
                 table: ConfusableTable | None = None,
                 store: EmbeddingStore | None = None,
                 paraphrases: Mapping[int, Mapping[int, str]] | None = None):
        self.perturbation = perturbation
        self.amount = amount
        self.rate = rate
        self.seed = seed
        self.table = table
        self.store = store
        self.paraphrases = paraphrases

    def get_params(self, deep: bool = True) -> dict[str, Any]:
        return {
            "perturbation": self.perturbation,
            "amount": self.amount,
            "rate": self.rate,
            "seed": self.seed,
            "table": self.table,
            "store": self.store,
            "paraphrases": self.paraphrases,
        }

    def set_params(self, **params) -> "DatasetPerturber":
        for key, value in params.items():
            if key not in self.get_params():
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    def fit(self, X: Dataset, y: Any = None) -> "DatasetPerturber":
        return self

    def transform(self, X: Dataset) -> Dataset:
        spec = PerturbationSpec(type=self.perturbation, amount=self.amount,
                                rate=self.rate, seed=self.seed)
        resources = PerturbationResources(
            table=self.table, store=self.store,
            paraphrases=self.paraphrases or {})
        return make_variant(X, spec, resources)

    def fit_transform(self, X: Dataset, y: Any = None) -> Dataset:
        return self.fit(X, y).transform(X)
