"""Error-prediction classifier: gradient-boosted regression trees on
logistic loss, built from scratch so training is fully deterministic.

Defaults are fixed at 100 rounds, learning rate 0.1, depth 3 and are
echoed into every report for reproducibility.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .features import FeatureVector, encode_features

DEFAULT_PARAMS = {
    "n_rounds": 100,
    "learning_rate": 0.1,
    "max_depth": 3,
    "reg_lambda": 1.0,
    "min_child_weight": 1.0,
    "gamma": 0.0,
}


class DegenerateModelError(ValueError):
    """Training labels contain a single class."""


class FoldError(ValueError):
    """Too few rows for the requested number of folds."""


@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


class _Tree:
    """One regression tree fit to gradient/hessian statistics with greedy
    exact split search on gain. Ties go to the lowest feature index and
    then the lowest threshold, so training is order-deterministic."""

    def __init__(self, max_depth: int, reg_lambda: float,
                 min_child_weight: float, gamma: float):
        self.max_depth = max_depth
        self.reg_lambda = reg_lambda
        self.min_child_weight = min_child_weight
        self.gamma = gamma
        self.root: _Node | None = None
        self.gains: dict[int, float] = {}

    def fit(self, X: np.ndarray, g: np.ndarray, h: np.ndarray) -> "_Tree":
        self.root = self._build(X, g, h, np.arange(len(X)), depth=0)
        return self

    def _leaf(self, g: np.ndarray, h: np.ndarray, idx: np.ndarray) -> _Node:
        return _Node(value=-g[idx].sum() / (h[idx].sum() + self.reg_lambda))

    def _build(self, X, g, h, idx, depth) -> _Node:
        if depth >= self.max_depth or len(idx) < 2:
            return self._leaf(g, h, idx)
        split = self._best_split(X, g, h, idx)
        if split is None:
            return self._leaf(g, h, idx)
        feature, threshold, gain = split
        self.gains[feature] = self.gains.get(feature, 0.0) + gain
        mask = X[idx, feature] < threshold
        node = _Node(feature=feature, threshold=threshold)
        node.left = self._build(X, g, h, idx[mask], depth + 1)
        node.right = self._build(X, g, h, idx[~mask], depth + 1)
        return node

    def _best_split(self, X, g, h, idx):
        g_total = g[idx].sum()
        h_total = h[idx].sum()
        lam = self.reg_lambda
        parent_score = g_total * g_total / (h_total + lam)
        best: tuple[float, int, float] | None = None
        for feature in range(X.shape[1]):
            values = X[idx, feature]
            order = np.argsort(values, kind="stable")
            sorted_values = values[order]
            g_sorted = g[idx][order]
            h_sorted = h[idx][order]
            g_left = np.cumsum(g_sorted)[:-1]
            h_left = np.cumsum(h_sorted)[:-1]
            # Candidate boundaries only between distinct adjacent values.
            valid = sorted_values[:-1] < sorted_values[1:]
            if not valid.any():
                continue
            h_right = h_total - h_left
            if self.min_child_weight > 0:
                valid &= (h_left >= self.min_child_weight) & \
                         (h_right >= self.min_child_weight)
                if not valid.any():
                    continue
            g_right = g_total - g_left
            gain = 0.5 * (g_left ** 2 / (h_left + lam)
                          + g_right ** 2 / (h_right + lam)
                          - parent_score) - self.gamma
            gain = np.where(valid, gain, -np.inf)
            pos = int(np.argmax(gain))
            if gain[pos] <= 0:
                continue
            threshold = (sorted_values[pos] + sorted_values[pos + 1]) / 2.0
            if best is None or gain[pos] > best[0]:
                best = (float(gain[pos]), feature, float(threshold))
        if best is None:
            return None
        return best[1], best[2], best[0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(len(X))
        for i, row in enumerate(X):
            node = self.root
            while not node.is_leaf:
                node = node.left if row[node.feature] < node.threshold else node.right
            out[i] = node.value
        return out


class GbdtClassifier:
    """Binary classifier, estimator-style: fit / predict / predict_proba /
    get_params. Deterministic given row order."""

    def __init__(self, n_rounds: int = 100, learning_rate: float = 0.1,
                 max_depth: int = 3, reg_lambda: float = 1.0,
                 min_child_weight: float = 1.0, gamma: float = 0.0):
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.reg_lambda = reg_lambda
        self.min_child_weight = min_child_weight
        self.gamma = gamma
        self.trees_: list[_Tree] = []
        self.feature_gains_: dict[int, float] = {}

    def get_params(self, deep: bool = True) -> dict[str, Any]:
        return {
            "n_rounds": self.n_rounds,
            "learning_rate": self.learning_rate,
            "max_depth": self.max_depth,
            "reg_lambda": self.reg_lambda,
            "min_child_weight": self.min_child_weight,
            "gamma": self.gamma,
        }

    def set_params(self, **params) -> "GbdtClassifier":
        valid = self.get_params()
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    def fit(self, X: np.ndarray, y: np.ndarray) -> "GbdtClassifier":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if len(X) < 2:
            raise DegenerateModelError("need at least 2 training rows")
        classes = np.unique(y)
        if len(classes) < 2:
            raise DegenerateModelError("training labels contain a single class")
        if not np.isin(classes, (0.0, 1.0)).all():
            raise ValueError("labels must be 0/1")
        self.trees_ = []
        self.feature_gains_ = {}
        margin = np.zeros(len(X))
        for _ in range(self.n_rounds):
            p = _sigmoid(margin)
            g = p - y
            h = p * (1.0 - p)
            tree = _Tree(self.max_depth, self.reg_lambda,
                         self.min_child_weight, self.gamma).fit(X, g, h)
            self.trees_.append(tree)
            margin += self.learning_rate * tree.predict(X)
            for feature, gain in tree.gains.items():
                self.feature_gains_[feature] = \
                    self.feature_gains_.get(feature, 0.0) + gain
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        margin = np.zeros(len(X))
        for tree in self.trees_:
            margin += self.learning_rate * tree.predict(X)
        return margin

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        p = _sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.decision_function(X) >= 0.0).astype(int)


def gbdt_train(rows: Sequence[FeatureVector], params: dict | None = None,
               include_confidence: bool = False,
               include_agreement: bool = False) -> tuple[GbdtClassifier, list[str]]:
    """Encode feature vectors and fit a classifier; returns the model and
    the encoded feature names."""
    X, y, names = encode_features(rows, include_confidence=include_confidence,
                                  include_agreement=include_agreement)
    model = GbdtClassifier(**{**DEFAULT_PARAMS, **(params or {})})
    model.fit(X, y)
    return model, names


@dataclass(frozen=True)
class CvReport:
    fold_scores: tuple[float, ...]
    mean_f1: float
    stderr: float
    majority_baseline: float
    importance: dict[str, float]
    importance_aggregated: dict[str, float]
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "fold_scores": list(self.fold_scores),
            "mean_f1": self.mean_f1,
            "stderr": self.stderr,
            "majority_baseline": self.majority_baseline,
            "importance": self.importance,
            "importance_aggregated": self.importance_aggregated,
            "params": self.params,
            "seed": self.seed,
        }


def cross_validate(rows: Sequence[FeatureVector], params: dict | None = None,
                   seed: int = 0, n_folds: int = 10,
                   include_confidence: bool = False,
                   include_agreement: bool = False) -> CvReport:
    """Shuffled k-fold cross validation with per-fold micro-F1.

    For binary single-label prediction micro-F1 equals accuracy, which is
    what the majority baseline is measured in as well. Feature importance
    is total split gain summed across the fold models, reported both per
    one-hot column and aggregated per original feature.
    """
    if len(rows) < n_folds:
        raise FoldError(f"need at least {n_folds} rows, got {len(rows)}")
    X, y, names = encode_features(rows, include_confidence=include_confidence,
                                  include_agreement=include_agreement)
    merged_params = {**DEFAULT_PARAMS, **(params or {})}
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(rows))
    folds = np.array_split(order, n_folds)
    scores = []
    gains: dict[str, float] = {name: 0.0 for name in names}
    for fold in folds:
        mask = np.ones(len(rows), dtype=bool)
        mask[fold] = False
        train_X, train_y = X[mask], y[mask]
        if len(np.unique(train_y)) < 2:
            predictions = np.full(len(fold), int(train_y.mean() >= 0.5))
        else:
            model = GbdtClassifier(**merged_params).fit(train_X, train_y)
            predictions = model.predict(X[fold])
            for feature, gain in model.feature_gains_.items():
                gains[names[feature]] += gain
        scores.append(float((predictions == y[fold]).mean()))
    mean = float(np.mean(scores))
    stderr = float(np.std(scores, ddof=1) / np.sqrt(len(scores)))
    majority = float(max(y.mean(), 1.0 - y.mean()))
    aggregated: dict[str, float] = {}
    for name, gain in gains.items():
        base = name.split("=", 1)[0]
        aggregated[base] = aggregated.get(base, 0.0) + gain
    return CvReport(
        fold_scores=tuple(scores),
        mean_f1=mean,
        stderr=stderr,
        majority_baseline=majority,
        importance=gains,
        importance_aggregated=aggregated,
        params=merged_params,
        seed=seed,
    )
