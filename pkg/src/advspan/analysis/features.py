"""Per-question explanatory features: question type, token lengths,
inter-annotator agreement, and Flesch-Kincaid readability.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..corpus import Dataset, Paragraph, QA
from ..eval import EvalRecord, normalize_answer
from ..textops import split_sentences, tokenize

QUESTION_TYPES = ("who", "what", "which", "when", "where", "why", "how", "other")
TRAINING_AMOUNT_LEVELS = ("none", "half", "full", "both")
PERTURBATION_TYPE_LEVELS = ("char", "word", "para", "none")

_VOWELS = set("aeiouy")


class JoinError(KeyError):
    """An eval record's qa_id has no matching QA in the dataset."""


def question_type(question: str) -> str:
    """First word of the question, folded into the eight-way enumeration."""
    tokens = tokenize(question)
    if not tokens:
        return "other"
    first = tokens[0].text.lower()
    return first if first in QUESTION_TYPES[:-1] else "other"


def syllable_count(word: str) -> int:
    """Vowel-group heuristic: count maximal runs of aeiouy, drop a silent
    final 'e', never return less than 1."""
    lowered = word.lower()
    groups = 0
    in_group = False
    for ch in lowered:
        if ch in _VOWELS:
            if not in_group:
                groups += 1
            in_group = True
        else:
            in_group = False
    if lowered.endswith("e") and not lowered.endswith("le") and groups > 1:
        groups -= 1
    return max(groups, 1)


def flesch_kincaid(text: str) -> float:
    """Grade level: 0.39 * (words/sentences) + 11.8 * (syllables/words) - 15.59."""
    words = tokenize(text)
    if not words:
        raise ValueError("readability undefined for text without words")
    sentences = max(len(split_sentences(text)), 1)
    syllables = sum(syllable_count(t.text) for t in words)
    return (0.39 * (len(words) / sentences)
            + 11.8 * (syllables / len(words))
            - 15.59)


def human_agreement(golds: Sequence[str]) -> float:
    """Share of annotators giving the modal (normalized) answer."""
    if not golds:
        raise ValueError("golds must be nonempty")
    counts = Counter(normalize_answer(g) for g in golds)
    return counts.most_common(1)[0][1] / len(golds)


@dataclass(frozen=True)
class FeatureVector:
    qa_id: str
    training_amount: str
    perturbation_type: str
    question_type: str
    question_length: int
    context_length: int
    answer_length: int
    readability: float
    label: int
    human_agreement: float | None = None
    confidence: float | None = None

    def __post_init__(self):
        if self.training_amount not in TRAINING_AMOUNT_LEVELS:
            raise ValueError(
                f"training_amount must be one of {TRAINING_AMOUNT_LEVELS}")
        if self.perturbation_type not in PERTURBATION_TYPE_LEVELS:
            raise ValueError(
                f"perturbation_type must be one of {PERTURBATION_TYPE_LEVELS}")
        if self.question_type not in QUESTION_TYPES:
            raise ValueError(f"question_type must be one of {QUESTION_TYPES}")
        if min(self.question_length, self.context_length, self.answer_length) < 0:
            raise ValueError("lengths must be >= 0")

    def to_dict(self) -> dict:
        return {
            "qa_id": self.qa_id,
            "training_amount": self.training_amount,
            "perturbation_type": self.perturbation_type,
            "question_type": self.question_type,
            "question_length": self.question_length,
            "context_length": self.context_length,
            "answer_length": self.answer_length,
            "readability": self.readability,
            "label": self.label,
            "human_agreement": self.human_agreement,
            "confidence": self.confidence,
        }


def build_features(records: Sequence[EvalRecord], d: Dataset,
                   ) -> list[FeatureVector]:
    """Join eval records to their QAs and compute one vector per record.

    Readability is computed on the dataset's context as evaluated, i.e.
    the perturbed text when the run used a perturbed variant.
    """
    by_id: dict[str, tuple[Paragraph, QA]] = {}
    for _, paragraph in d.paragraphs():
        for qa in paragraph.qas:
            by_id[qa.id] = (paragraph, qa)
    context_cache: dict[int, tuple[int, float]] = {}
    vectors = []
    for record in records:
        if record.qa_id not in by_id:
            raise JoinError(f"qa_id {record.qa_id!r} not present in dataset")
        paragraph, qa = by_id[record.qa_id]
        key = id(paragraph)
        if key not in context_cache:
            context_cache[key] = (len(tokenize(paragraph.context)),
                                  flesch_kincaid(paragraph.context))
        context_length, readability = context_cache[key]
        vectors.append(FeatureVector(
            qa_id=record.qa_id,
            training_amount=record.training_amount,
            perturbation_type=record.perturbation_type,
            question_type=question_type(qa.question),
            question_length=len(tokenize(qa.question)),
            context_length=context_length,
            answer_length=len(tokenize(record.model_answer)),
            readability=readability,
            label=int(record.is_error),
            human_agreement=(human_agreement(record.gold_answers)
                             if record.gold_answers else None),
            confidence=record.confidence,
        ))
    return vectors


def encode_features(rows: Sequence[FeatureVector],
                    include_confidence: bool = False,
                    include_agreement: bool = False,
                    ) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """One-hot encode the categorical features, pass numeric ones through.

    Returns (X, y, feature_names). One-hot columns are named
    "<feature>=<level>" so importances can be re-aggregated per feature.
    """
    names: list[str] = []
    names += [f"training_amount={a}" for a in TRAINING_AMOUNT_LEVELS]
    names += [f"perturbation_type={t}" for t in PERTURBATION_TYPE_LEVELS]
    names += [f"question_type={q}" for q in QUESTION_TYPES]
    names += ["question_length", "context_length", "answer_length",
              "readability"]
    if include_agreement:
        names.append("human_agreement")
    if include_confidence:
        names.append("confidence")

    X = np.zeros((len(rows), len(names)), dtype=np.float64)
    y = np.zeros(len(rows), dtype=np.float64)
    for i, row in enumerate(rows):
        values: list[float] = []
        values += [1.0 if row.training_amount == a else 0.0
                   for a in TRAINING_AMOUNT_LEVELS]
        values += [1.0 if row.perturbation_type == t else 0.0
                   for t in PERTURBATION_TYPE_LEVELS]
        values += [1.0 if row.question_type == q else 0.0
                   for q in QUESTION_TYPES]
        values += [float(row.question_length), float(row.context_length),
                   float(row.answer_length), row.readability]
        if include_agreement:
            values.append(row.human_agreement if row.human_agreement is not None
                          else 1.0)
        if include_confidence:
            values.append(row.confidence if row.confidence is not None else 0.0)
        X[i] = values
        y[i] = row.label
    return X, y, names
