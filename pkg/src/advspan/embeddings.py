"""GLoVe-format word vectors with exact nearest-neighbor queries."""
from __future__ import annotations

import numpy as np


class EmbeddingParseError(Exception):
    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class OutOfVocabularyError(KeyError):
    """Query word is not in the store; callers usually skip the word."""


class EmbeddingStore:
    """Immutable vocabulary of dense word vectors.

    Queries are pure; the store is safe for concurrent reads. Zero-norm
    vectors never win a similarity query.
    """

    def __init__(self, words: list[str], matrix: np.ndarray,
                 duplicate_count: int = 0):
        if matrix.ndim != 2 or matrix.shape[0] != len(words):
            raise ValueError("matrix shape does not match vocabulary")
        self.words = list(words)
        self.matrix = np.asarray(matrix, dtype=np.float64)
        self.index = {w: i for i, w in enumerate(self.words)}
        self.duplicate_count = duplicate_count
        norms = np.linalg.norm(self.matrix, axis=1)
        self._norms = norms
        # Unit rows; zero-norm rows stay zero so their cosine is 0 and they
        # are pushed to -inf below.
        safe = np.where(norms == 0.0, 1.0, norms)
        self._unit = self.matrix / safe[:, None]
        self._zero_rows = norms == 0.0

    def __len__(self) -> int:
        return len(self.words)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def vector(self, word: str) -> np.ndarray:
        try:
            return self.matrix[self.index[word]]
        except KeyError:
            raise OutOfVocabularyError(word) from None

    def nearest_neighbor(self, word: str, k: int = 1) -> list[tuple[str, float]]:
        """Top-k words by cosine similarity, excluding the query itself.

        Ties break toward the earlier vocabulary entry; results are
        invariant under positive rescaling of any stored vector.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        if word not in self.index:
            raise OutOfVocabularyError(word)
        row = self.index[word]
        if self._zero_rows[row]:
            sims = np.full(len(self.words), -np.inf)
        else:
            sims = self._unit @ self._unit[row]
            sims[self._zero_rows] = -np.inf
        sims[row] = -np.inf
        # Stable sort on descending similarity keeps vocabulary order on ties.
        order = np.argsort(-sims, kind="stable")[:k]
        return [(self.words[i], float(sims[i])) for i in order
                if sims[i] != -np.inf]


def load_embeddings(raw: bytes | str, max_vocab: int | None = None) -> EmbeddingStore:
    """Parse GLoVe text format: one line per word, space-separated reals.

    Dimension is inferred from the first line; a line with a different
    dimension is a parse error. On duplicate words the first occurrence
    wins and the duplicate is counted.
    """
    text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    words: list[str] = []
    vectors: list[list[float]] = []
    seen: set[str] = set()
    duplicates = 0
    dim: int | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.rstrip().split(" ")
        if len(parts) < 2:
            raise EmbeddingParseError("expected word and vector", lineno)
        word = parts[0]
        try:
            vec = [float(x) for x in parts[1:]]
        except ValueError as exc:
            raise EmbeddingParseError(f"bad float: {exc}", lineno) from None
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise EmbeddingParseError(
                f"dimension {len(vec)} != {dim} of first entry", lineno)
        if word in seen:
            duplicates += 1
            continue
        seen.add(word)
        words.append(word)
        vectors.append(vec)
        if max_vocab is not None and len(words) >= max_vocab:
            break
    matrix = np.array(vectors, dtype=np.float64) if vectors else np.zeros((0, 1))
    return EmbeddingStore(words, matrix, duplicate_count=duplicates)


def nearest_neighbor(store: EmbeddingStore, word: str, k: int = 1,
                     ) -> list[tuple[str, float]]:
    return store.nearest_neighbor(word, k)
