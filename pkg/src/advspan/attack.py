"""Leave-one-out word-importance scoring against a black-box model and
negative-constraint emission for strategically targeted paraphrasing.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from .corpus import Dataset, Paragraph, PerturbationMeta, QA
from .eval import exact_match, response_confidence
from .model_client import ModelRequest, Predictor
from .perturb import ProtectedRegions, apply_paraphrases
from .corpus import remap_answers
from .textops import split_sentences, tokenize

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = 5


@dataclass(frozen=True)
class ImportanceScore:
    token: str
    start: int
    end: int
    score: float
    base_correct: bool
    ablated_correct: bool


@dataclass(frozen=True)
class ConstraintSpec:
    paragraph_index: int
    # sentence index -> negative-constraint tokens for that sentence
    sentences: Mapping[int, tuple[str, ...]]


def _signed_confidence(resp, golds: Sequence[str]) -> tuple[float, bool]:
    """Confidence signed by correctness: positive when the model is right.
    Removing a word that supports a correct answer then yields a positive
    importance (base minus ablated)."""
    correct = bool(exact_match(resp.answer_text, golds)) if golds else False
    conf = response_confidence(resp)
    return (conf if correct else -conf), correct


def ablate_token(context: str, start: int, end: int) -> str:
    """Delete a token and collapse the whitespace around it."""
    left = context[:start]
    right = context[end:]
    if left.endswith(" ") and right.startswith(" "):
        left = left[:-1]
    elif right.startswith(" ") and not left:
        right = right[1:]
    elif left.endswith(" ") and not right:
        left = left[:-1]
    return left + right


def importance_scores(paragraph: Paragraph, qa: QA,
                      predictor: Predictor) -> list[ImportanceScore]:
    """Score every unprotected token by the signed confidence drop its
    deletion causes. Issues exactly 1 + |eligible tokens| model queries.
    Per-token model failures are logged and the token skipped."""
    golds = [a.text for a in qa.answers]
    prot = ProtectedRegions.from_paragraph(paragraph)
    base = predictor(ModelRequest(context=paragraph.context,
                                  question=qa.question))
    base_signed, base_correct = _signed_confidence(base, golds)
    scores = []
    for token in tokenize(paragraph.context):
        if prot.intersects(token.start, token.end):
            continue
        ablated_context = ablate_token(paragraph.context, token.start, token.end)
        if not ablated_context.strip():
            continue
        try:
            resp = predictor(ModelRequest(context=ablated_context,
                                          question=qa.question))
        except Exception as exc:
            logger.warning("ablation query failed for %r at %d: %s",
                           token.text, token.start, exc)
            continue
        ablated_signed, ablated_correct = _signed_confidence(resp, golds)
        scores.append(ImportanceScore(
            token=token.text,
            start=token.start,
            end=token.end,
            score=base_signed - ablated_signed,
            base_correct=base_correct,
            ablated_correct=ablated_correct,
        ))
    return scores


def top_k_constraints(scores: Sequence[ImportanceScore], k: int,
                      context: str, paragraph_index: int = 0) -> ConstraintSpec:
    """The k highest-scoring distinct tokens (case-insensitive, ties to the
    earlier position), grouped by the sentence that contains them."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(scores, key=lambda s: (-s.score, s.start))
    chosen: list[ImportanceScore] = []
    seen: set[str] = set()
    for score in ranked:
        key = score.token.lower()
        if key in seen:
            continue
        seen.add(key)
        chosen.append(score)
        if len(chosen) == k:
            break
    sentences = split_sentences(context)
    by_sentence: dict[int, list[str]] = {}
    for score in chosen:
        sentence_index = _containing_sentence(sentences, score.start)
        by_sentence.setdefault(sentence_index, []).append(score.token)
    return ConstraintSpec(
        paragraph_index=paragraph_index,
        sentences={i: tuple(tokens) for i, tokens in sorted(by_sentence.items())},
    )


def _containing_sentence(sentences: list[tuple[int, int]], pos: int) -> int:
    for i, (start, end) in enumerate(sentences):
        if start <= pos < end:
            return i
    # Tokens in inter-sentence whitespace cannot occur; closest preceding
    # sentence is a safe fallback for a position past the last interval.
    return max(len(sentences) - 1, 0)


def constraints_to_jsonl(specs: Sequence[ConstraintSpec]) -> str:
    """Rewriter input: one record per (paragraph, sentence)."""
    lines = []
    for spec in specs:
        for sentence_index in sorted(spec.sentences):
            lines.append(json.dumps({
                "paragraph_index": spec.paragraph_index,
                "sentence_index": sentence_index,
                "negative_constraints": list(spec.sentences[sentence_index]),
            }, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


def apply_strategic_paraphrases(
    d: Dataset,
    paraphrase_sets: Mapping[int, Mapping[int, str]],
) -> Dataset:
    """Ingest externally rewritten sentences (produced under the emitted
    negative constraints) and rebuild the dataset with remapped answers."""
    articles = []
    index = 0
    for article in d.articles:
        paragraphs = []
        for paragraph in article.paragraphs:
            sentence_replacements = paraphrase_sets.get(index, {})
            if sentence_replacements:
                prot = ProtectedRegions.from_paragraph(paragraph)
                new_context, offset_map = apply_paraphrases(
                    paragraph.context, prot, sentence_replacements)
                qas = tuple(
                    replace(qa,
                            is_perturbed=True,
                            perturbation_meta=PerturbationMeta("para", "full"))
                    for qa in remap_answers(paragraph.qas, offset_map, new_context))
                paragraphs.append(replace(paragraph, context=new_context, qas=qas))
            else:
                paragraphs.append(paragraph)
            index += 1
        articles.append(replace(article, paragraphs=tuple(paragraphs)))
    return replace(d, articles=tuple(articles))
