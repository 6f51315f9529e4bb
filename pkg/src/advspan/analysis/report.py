"""Report tables over evaluation records: error heatmaps, confidence
splits, answer-length ratios, distribution tables, readability medians,
and the model-vs-human confidence joint histogram.

Every artifact is a deterministic function of its inputs: CSV and JSON
carry the numbers, SVG files are static renderings of the same tables.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Sequence

from ..eval import EvalRecord
from ..textops import tokenize
from .features import FeatureVector

AMOUNT_ORDER = ("none", "half", "full", "both", "ens")
TYPE_ORDER = ("char", "word", "para", "none")
QUESTION_TYPE_ORDER = ("who", "what", "which", "when", "where", "why",
                       "how", "other")


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows(self.rows)
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {"columns": list(self.columns),
             "rows": [list(r) for r in self.rows]},
            ensure_ascii=False, indent=2) + "\n"


def error_heatmap(records: Sequence[EvalRecord]) -> Table:
    """Error counts per (training amount, perturbation type); cells
    partition the errors exactly."""
    counts: dict[tuple[str, str], int] = {}
    for r in records:
        if r.is_error:
            key = (r.training_amount, r.perturbation_type)
            counts[key] = counts.get(key, 0) + 1
    rows = []
    for amount in AMOUNT_ORDER:
        row = [amount] + [counts.get((amount, t), 0) for t in TYPE_ORDER]
        rows.append(tuple(row))
    return Table(columns=("training_amount",) + TYPE_ORDER, rows=tuple(rows))


def confidence_split(records: Sequence[EvalRecord],
                     threshold: float = 0.5) -> Table:
    """High- vs low-confidence misclassification counts at the threshold."""
    rows = []
    groups: dict[tuple[str, str], list[EvalRecord]] = {}
    for r in records:
        if r.is_error:
            groups.setdefault((r.training_amount, r.perturbation_type),
                              []).append(r)
    for (amount, ptype) in sorted(groups):
        errs = groups[(amount, ptype)]
        high = sum(1 for r in errs if r.confidence >= threshold)
        rows.append((amount, ptype, high, len(errs) - high))
    return Table(
        columns=("training_amount", "perturbation_type",
                 "high_confidence_errors", "low_confidence_errors"),
        rows=tuple(rows))


def answer_length_ratio(records: Sequence[EvalRecord]) -> Table:
    """Correct and error counts by model-answer token length."""
    by_length: dict[int, list[int]] = {}
    for r in records:
        length = len(tokenize(r.model_answer))
        bucket = by_length.setdefault(length, [0, 0])
        bucket[0 if not r.is_error else 1] += 1
    rows = []
    for length in sorted(by_length):
        correct, error = by_length[length]
        ratio = round(correct / error, 6) if error else None
        rows.append((length, correct, error, ratio))
    return Table(columns=("answer_length", "correct", "error",
                          "correct_to_error_ratio"), rows=tuple(rows))


def _distribution(values: Sequence, order: Sequence | None = None) -> Table:
    counts: dict = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    keys = list(order) if order is not None else sorted(counts)
    rows = tuple((k, counts.get(k, 0)) for k in keys)
    return Table(columns=("value", "count"), rows=rows)


def readability_medians(features: Sequence[FeatureVector]) -> Table:
    """Median context readability for correct vs error records. The
    direction of the gap is an empirical finding, not an invariant."""
    correct = sorted(f.readability for f in features if f.label == 0)
    errors = sorted(f.readability for f in features if f.label == 1)
    rows = tuple(
        (name, round(_median(vals), 4) if vals else None, len(vals))
        for name, vals in (("correct", correct), ("error", errors)))
    return Table(columns=("group", "median_readability", "count"), rows=rows)


def _median(sorted_values: list[float]) -> float:
    n = len(sorted_values)
    mid = n // 2
    if n % 2:
        return sorted_values[mid]
    return (sorted_values[mid - 1] + sorted_values[mid]) / 2.0


def confidence_joint(records: Sequence[EvalRecord],
                     features: Sequence[FeatureVector],
                     bins: int = 6) -> Table:
    """Joint histogram of human agreement vs model confidence over the
    misclassified records. Bin count defaults to six, one per possible
    annotator count."""
    agreement_by_id = {f.qa_id: f.human_agreement for f in features}
    cells: dict[tuple[int, int], int] = {}
    for r in records:
        if not r.is_error:
            continue
        agreement = agreement_by_id.get(r.qa_id)
        if agreement is None:
            continue
        hi = min(int(agreement * bins), bins - 1)
        mi = min(int(r.confidence * bins), bins - 1)
        cells[(hi, mi)] = cells.get((hi, mi), 0) + 1
    rows = []
    for hi in range(bins):
        for mi in range(bins):
            rows.append((hi, mi, cells.get((hi, mi), 0)))
    return Table(columns=("human_bin", "model_bin", "count"),
                 rows=tuple(rows))


def report_tables(records: Sequence[EvalRecord],
                  features: Sequence[FeatureVector] | None = None,
                  threshold: float = 0.5,
                  bins: int = 6) -> dict[str, Table]:
    """All report tables; feature-dependent ones only when features are
    supplied."""
    tables = {
        "error_heatmap": error_heatmap(records),
        "confidence_split": confidence_split(records, threshold),
        "answer_length_ratio": answer_length_ratio(records),
    }
    if features is not None:
        tables["question_type_distribution"] = _distribution(
            [f.question_type for f in features], QUESTION_TYPE_ORDER)
        tables["question_length_distribution"] = _distribution(
            [f.question_length for f in features])
        tables["context_length_distribution"] = _distribution(
            [f.context_length for f in features])
        tables["readability_medians"] = readability_medians(features)
        tables["confidence_joint"] = confidence_joint(records, features, bins)
    return tables


# ---------------------------------------------------------------------------
# Static SVG renderings
# ---------------------------------------------------------------------------

_CELL = 48
_LEFT = 110
_TOP = 46


def _svg_header(width: int, height: int, title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" font-family="sans-serif" font-size="12">',
        f'<text x="8" y="18" font-size="14">{title}</text>',
    ]


def svg_heatmap(table: Table, title: str) -> str:
    """Render an amount-by-type count table as a shaded grid."""
    col_labels = table.columns[1:]
    row_labels = [row[0] for row in table.rows]
    values = [[int(v) for v in row[1:]] for row in table.rows]
    peak = max((v for row in values for v in row), default=0)
    width = _LEFT + _CELL * len(col_labels) + 20
    height = _TOP + _CELL * len(row_labels) + 20
    parts = _svg_header(width, height, title)
    for j, label in enumerate(col_labels):
        parts.append(f'<text x="{_LEFT + j * _CELL + 8}" y="{_TOP - 8}">'
                     f'{label}</text>')
    for i, label in enumerate(row_labels):
        y = _TOP + i * _CELL
        parts.append(f'<text x="8" y="{y + 28}">{label}</text>')
        for j, value in enumerate(values[i]):
            shade = 255 - int(200 * (value / peak)) if peak else 255
            x = _LEFT + j * _CELL
            parts.append(
                f'<rect x="{x}" y="{y}" width="{_CELL - 2}" '
                f'height="{_CELL - 2}" fill="rgb(255,{shade},{shade})" '
                f'stroke="#999"/>')
            parts.append(
                f'<text x="{x + 8}" y="{y + 28}">{value}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def svg_bars(table: Table, title: str, label_col: int = 0,
             value_col: int = 1) -> str:
    """Render a (label, count) table as a vertical bar chart."""
    labels = [str(row[label_col]) for row in table.rows]
    values = [float(row[value_col] or 0) for row in table.rows]
    peak = max(values, default=0.0)
    bar_w = 34
    chart_h = 160
    width = 40 + bar_w * max(len(values), 1) + 20
    height = _TOP + chart_h + 40
    parts = _svg_header(width, height, title)
    for i, (label, value) in enumerate(zip(labels, values)):
        h = int(chart_h * (value / peak)) if peak else 0
        x = 40 + i * bar_w
        y = _TOP + chart_h - h
        parts.append(f'<rect x="{x}" y="{y}" width="{bar_w - 6}" '
                     f'height="{h}" fill="#4878a8"/>')
        parts.append(f'<text x="{x}" y="{_TOP + chart_h + 16}">{label}</text>')
        parts.append(f'<text x="{x}" y="{y - 4}" font-size="10">'
                     f'{value:g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
