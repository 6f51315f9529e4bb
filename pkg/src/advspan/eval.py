"""Answer scoring (EM / token F1), normalized-entropy confidence, and
two-vote answer ensembling.
"""
from __future__ import annotations

import csv
import io
import json
import math
import re
import string
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import Dataset
from .model_client import (
    FullDistribution, ModelRequest, ModelResponse, Predictor,
)
from .textops import tokenize

TRAINING_AMOUNTS = ("none", "half", "full", "both", "ens")

_ARTICLES_RE = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_answer(answer: str) -> str:
    """Lowercase, strip punctuation, drop articles, collapse whitespace
    (the usual span-QA scoring normalization)."""
    lowered = answer.lower()
    no_punct = lowered.translate(_PUNCT_TABLE)
    no_articles = _ARTICLES_RE.sub(" ", no_punct)
    return " ".join(no_articles.split())


def exact_match(prediction: str, golds: Sequence[str]) -> int:
    if not golds:
        raise ValueError("golds must be nonempty")
    norm = normalize_answer(prediction)
    return int(any(norm == normalize_answer(g) for g in golds))


def _token_f1(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    if not pred_tokens or not gold_tokens:
        return float(pred_tokens == gold_tokens)
    common = Counter(pred_tokens) & Counter(gold_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def f1_score(prediction: str, golds: Sequence[str]) -> float:
    """Max token-multiset F1 of the normalized prediction over the golds."""
    if not golds:
        raise ValueError("golds must be nonempty")
    pred_tokens = normalize_answer(prediction).split()
    return max(_token_f1(pred_tokens, normalize_answer(g).split())
               for g in golds)


# ---------------------------------------------------------------------------
# Confidence
# ---------------------------------------------------------------------------

def _normalized_entropy(probs: Sequence[float], n: int) -> float:
    """Entropy over n outcomes scaled into [0, 1]; 0 ln 0 = 0."""
    if n <= 1:
        return 0.0
    h = -sum(p * math.log(p) for p in probs if p > 0.0)
    return h / math.log(n)


@dataclass(frozen=True)
class ConfidenceInputs:
    start_probs: Sequence[float]
    end_probs: Sequence[float]
    num_tokens: int


def confidence(ci: ConfidenceInputs) -> float:
    """One minus the mean normalized entropy of the start and end
    distributions: 1 for delta distributions, 0 for uniform ones."""
    hs = _normalized_entropy(ci.start_probs, ci.num_tokens)
    he = _normalized_entropy(ci.end_probs, ci.num_tokens)
    value = 1.0 - (hs + he) / 2.0
    return min(1.0, max(0.0, value))


def confidence_flat(n: int, p_start: float, p_end: float) -> float:
    """Confidence reconstructed from only the top start/end probabilities
    by spreading the leftover mass uniformly over the other n-1 tokens."""
    if n < 1:
        raise ValueError("n must be >= 1")
    for name, p in (("p_start", p_start), ("p_end", p_end)):
        if not 0.0 < p <= 1.0:
            raise ValueError(f"{name} must lie in (0, 1]")
    if n == 1:
        return 1.0
    return confidence(ConfidenceInputs(
        start_probs=_flat_tail(n, p_start),
        end_probs=_flat_tail(n, p_end),
        num_tokens=n,
    ))


def _flat_tail(n: int, p_top: float) -> list[float]:
    q = (1.0 - p_top) / (n - 1)
    return [p_top] + [q] * (n - 1)


def response_confidence(resp: ModelResponse) -> float:
    """Confidence for either distribution shape a model may return."""
    dist = resp.distribution
    if isinstance(dist, FullDistribution):
        return confidence(ConfidenceInputs(
            dist.start_probs, dist.end_probs, dist.num_tokens))
    return confidence_flat(dist.num_tokens, dist.start_top_prob,
                           dist.end_top_prob)


# ---------------------------------------------------------------------------
# Ensembling
# ---------------------------------------------------------------------------

def ensemble_answer(answers: Sequence[str]) -> str:
    """Two-vote token ensemble over exactly three model answers.

    Each answer votes once per distinct token (case-insensitive); tokens
    with two or more votes are kept, ordered by first appearance, in the
    casing of their first appearance.
    """
    if len(answers) != 3:
        raise ValueError("ensemble_answer expects exactly 3 answers")
    votes: Counter[str] = Counter()
    first_seen: dict[str, int] = {}
    first_casing: dict[str, str] = {}
    position = 0
    for answer in answers:
        seen_here: set[str] = set()
        for token in tokenize(answer):
            key = token.text.lower()
            if key not in first_seen:
                first_seen[key] = position
                first_casing[key] = token.text
            position += 1
            if key in seen_here:
                continue
            seen_here.add(key)
            votes[key] += 1
    kept = [key for key, count in votes.items() if count >= 2]
    kept.sort(key=lambda key: first_seen[key])
    return " ".join(first_casing[key] for key in kept)


# ---------------------------------------------------------------------------
# Dataset evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvalRecord:
    qa_id: str
    model_answer: str
    gold_answers: tuple[str, ...]
    em: int
    f1: float
    confidence: float
    perturbation_type: str
    perturbation_amount: str
    training_amount: str
    failed: bool = False
    failure_reason: str = ""

    @property
    def is_error(self) -> bool:
        return self.em == 0

    def to_dict(self) -> dict:
        return {
            "qa_id": self.qa_id,
            "model_answer": self.model_answer,
            "gold_answers": list(self.gold_answers),
            "em": self.em,
            "f1": self.f1,
            "confidence": self.confidence,
            "is_error": self.is_error,
            "perturbation_type": self.perturbation_type,
            "perturbation_amount": self.perturbation_amount,
            "training_amount": self.training_amount,
            "failed": self.failed,
            "failure_reason": self.failure_reason,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EvalRecord":
        return cls(
            qa_id=doc["qa_id"],
            model_answer=doc["model_answer"],
            gold_answers=tuple(doc["gold_answers"]),
            em=int(doc["em"]),
            f1=float(doc["f1"]),
            confidence=float(doc["confidence"]),
            perturbation_type=doc.get("perturbation_type", "none"),
            perturbation_amount=doc.get("perturbation_amount", "none"),
            training_amount=doc.get("training_amount", "none"),
            failed=bool(doc.get("failed", False)),
            failure_reason=doc.get("failure_reason", ""),
        )


def _evaluate_one(context: str, qa, predictor: Predictor,
                  training_amount: str) -> EvalRecord:
    meta = qa.perturbation_meta
    ptype = meta.type if meta else "none"
    pamount = meta.amount if meta else "none"
    golds = tuple(a.text for a in qa.answers)
    try:
        if not golds:
            raise ValueError("QA has no gold answers")
        resp = predictor(ModelRequest(context=context, question=qa.question))
        return EvalRecord(
            qa_id=qa.id,
            model_answer=resp.answer_text,
            gold_answers=golds,
            em=exact_match(resp.answer_text, golds),
            f1=f1_score(resp.answer_text, golds),
            confidence=response_confidence(resp),
            perturbation_type=ptype,
            perturbation_amount=pamount,
            training_amount=training_amount,
        )
    except Exception as exc:
        return EvalRecord(
            qa_id=qa.id,
            model_answer="",
            gold_answers=golds,
            em=0,
            f1=0.0,
            confidence=0.0,
            perturbation_type=ptype,
            perturbation_amount=pamount,
            training_amount=training_amount,
            failed=True,
            failure_reason=str(exc),
        )


def evaluate_dataset(d: Dataset, predictor: Predictor,
                     training_amount: str = "none",
                     concurrency: int = 1) -> list[EvalRecord]:
    """One record per QA, in document order regardless of concurrency.
    Per-QA model failures are recorded on the record and the run
    continues. ``concurrency`` caps in-flight model calls."""
    if training_amount not in TRAINING_AMOUNTS:
        raise ValueError(f"training_amount must be one of {TRAINING_AMOUNTS}")
    tasks = [(paragraph.context, qa)
             for _, paragraph in d.paragraphs() for qa in paragraph.qas]
    if concurrency <= 1:
        return [_evaluate_one(context, qa, predictor, training_amount)
                for context, qa in tasks]
    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        return list(pool.map(
            lambda task: _evaluate_one(task[0], task[1], predictor,
                                       training_amount),
            tasks))


def ensemble_records(none_records: Sequence[EvalRecord],
                     half_records: Sequence[EvalRecord],
                     full_records: Sequence[EvalRecord]) -> list[EvalRecord]:
    """Rescore the two-vote ensemble answer of three aligned runs.

    The three runs must cover identical QA ids in identical order.
    Ensemble confidence is reported as the mean of the member confidences
    (toolkit convention; the vote itself has no distribution).
    """
    ids = [[r.qa_id for r in records]
           for records in (none_records, half_records, full_records)]
    if not (ids[0] == ids[1] == ids[2]):
        raise ValueError("eval record files do not cover identical QA ids")
    out = []
    for none_r, half_r, full_r in zip(none_records, half_records, full_records):
        answer = ensemble_answer(
            [none_r.model_answer, half_r.model_answer, full_r.model_answer])
        golds = none_r.gold_answers
        out.append(EvalRecord(
            qa_id=none_r.qa_id,
            model_answer=answer,
            gold_answers=golds,
            em=exact_match(answer, golds) if golds else 0,
            f1=f1_score(answer, golds) if golds else 0.0,
            confidence=(none_r.confidence + half_r.confidence
                        + full_r.confidence) / 3.0,
            perturbation_type=none_r.perturbation_type,
            perturbation_amount=none_r.perturbation_amount,
            training_amount="ens",
        ))
    return out


# ---------------------------------------------------------------------------
# Record I/O: JSON Lines and CSV with a fixed column order
# ---------------------------------------------------------------------------

CSV_COLUMNS = (
    "qa_id", "model_answer", "gold_answers", "em", "f1", "confidence",
    "is_error", "perturbation_type", "perturbation_amount",
    "training_amount", "failed", "failure_reason",
)


def records_to_jsonl(records: Iterable[EvalRecord]) -> str:
    return "".join(json.dumps(r.to_dict(), ensure_ascii=False) + "\n"
                   for r in records)


def records_from_jsonl(text: str) -> list[EvalRecord]:
    return [EvalRecord.from_dict(json.loads(line))
            for line in text.splitlines() if line.strip()]


def records_to_csv(records: Iterable[EvalRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        doc = r.to_dict()
        doc["gold_answers"] = json.dumps(doc["gold_answers"], ensure_ascii=False)
        writer.writerow([doc[c] for c in CSV_COLUMNS])
    return buf.getvalue()
