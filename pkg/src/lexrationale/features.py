"""N-gram bag-of-words features with information-gain selection."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy import sparse

from lexrationale.tokenize import TokenSeq

DEFAULT_K = 2000
NGRAM_MAX = 3


def _as_tokens(seq) -> Sequence[str]:
    return seq.tokens if isinstance(seq, TokenSeq) else seq


def iter_ngrams(tokens: Sequence[str], ngram_max: int = NGRAM_MAX) -> Iterator[str]:
    yield from tokens
    for n in range(2, ngram_max + 1):
        for i in range(len(tokens) - n + 1):
            yield "_".join(tokens[i : i + n])


def extract_ngrams(seq: TokenSeq | Sequence[str], ngram_max: int = NGRAM_MAX) -> Counter:
    """Multiset of all contiguous 1..``ngram_max``-grams, words joined by ``_``."""
    if not 1 <= ngram_max <= 3:
        raise ValueError(f"ngram_max must be 1, 2 or 3, got {ngram_max}")
    return Counter(iter_ngrams(_as_tokens(seq), ngram_max))


def gram_count(length: int, ngram_max: int = NGRAM_MAX) -> int:
    return sum(max(0, length - n + 1) for n in range(1, ngram_max + 1))


def _entropy2(p):
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(p > 0, p * np.log2(p), 0.0) - np.where(q > 0, q * np.log2(q), 0.0)
    return h


def information_gain_array(present_pos, present_neg, total_pos: int, total_neg: int) -> np.ndarray:
    """Vectorized :func:`information_gain` over arrays of presence counts."""
    a = np.asarray(present_pos, dtype=float)
    b = np.asarray(present_neg, dtype=float)
    total = float(total_pos + total_neg)
    present = a + b
    absent = total - present
    with np.errstate(divide="ignore", invalid="ignore"):
        h_present = np.where(present > 0, _entropy2(np.where(present > 0, a / present, 0.0)), 0.0)
        h_absent = np.where(absent > 0, _entropy2(np.where(absent > 0, (total_pos - a) / absent, 0.0)), 0.0)
    h_class = _entropy2(total_pos / total)
    ig = h_class - (present / total) * h_present - (absent / total) * h_absent
    # rounding can leave tiny negatives on independent tables
    return np.maximum(ig, 0.0)


def information_gain(present_pos: int, present_neg: int, total_pos: int, total_neg: int) -> float:
    """Information gain (bits) of binary feature presence about the class.

    ``H(class) - P(present) H(class | present) - P(absent) H(class | absent)``
    with ``0 log 0 = 0``.
    """
    if min(present_pos, present_neg, total_pos, total_neg) < 0:
        raise ValueError("counts must be non-negative")
    if present_pos > total_pos or present_neg > total_neg:
        raise ValueError("present count exceeds class total")
    if total_pos + total_neg < 1:
        raise ValueError("at least one unit required")
    return float(information_gain_array([present_pos], [present_neg], total_pos, total_neg)[0])


@dataclass(frozen=True)
class FeatureSpace:
    features: tuple[str, ...]
    ngram_max: int = NGRAM_MAX
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        index = {f: i for i, f in enumerate(self.features)}
        if len(index) != len(self.features):
            raise ValueError("duplicate feature in feature space")
        object.__setattr__(self, "index", index)

    @property
    def k(self) -> int:
        return len(self.features)

    def __len__(self) -> int:
        return len(self.features)


@dataclass(frozen=True)
class FeatureVector:
    entries: dict[int, float]
    source_length: int

    def __len__(self) -> int:
        return len(self.entries)


def document_frequencies(units: Iterable, ngram_max: int = NGRAM_MAX) -> Counter:
    df: Counter = Counter()
    for unit in units:
        df.update(set(iter_ngrams(_as_tokens(unit), ngram_max)))
    return df


def select_top_k(
    positives: Sequence,
    negatives: Sequence,
    k: int = DEFAULT_K,
    ngram_max: int = NGRAM_MAX,
    min_units: int = 2,
) -> FeatureSpace:
    """Pick the ``k`` n-grams with the highest information gain.

    Presence is counted once per training unit (document or snippet).  N-grams
    occurring in fewer than ``min_units`` units are dropped before ranking.
    Ties are broken by the feature string.
    """
    if not positives or not negatives:
        raise ValueError("feature selection needs units from both classes")
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    df_pos = document_frequencies(positives, ngram_max)
    df_neg = document_frequencies(negatives, ngram_max)
    candidates = sorted(g for g in df_pos.keys() | df_neg.keys() if df_pos[g] + df_neg[g] >= min_units)
    if not candidates:
        raise ValueError("no candidate features survive the minimum unit count")
    a = np.fromiter((df_pos[g] for g in candidates), dtype=float, count=len(candidates))
    b = np.fromiter((df_neg[g] for g in candidates), dtype=float, count=len(candidates))
    ig = information_gain_array(a, b, len(positives), len(negatives))
    # candidates are already lexicographic, so a stable sort on -IG breaks ties by string
    order = np.argsort(-ig, kind="stable")[:k]
    return FeatureSpace(tuple(candidates[i] for i in order), ngram_max)


def vectorize(seq: TokenSeq | Sequence[str], space: FeatureSpace) -> FeatureVector:
    """Relative n-gram frequencies restricted to the selected features."""
    tokens = _as_tokens(seq)
    total = gram_count(len(tokens), space.ngram_max)
    if total == 0:
        return FeatureVector({}, len(tokens))
    counts = Counter(g for g in iter_ngrams(tokens, space.ngram_max) if g in space.index)
    entries = {space.index[g]: c / total for g, c in counts.items()}
    return FeatureVector(dict(sorted(entries.items())), len(tokens))


def vectorize_many(units: Iterable, space: FeatureSpace) -> sparse.csr_matrix:
    """Stack :func:`vectorize` rows into a CSR matrix of shape (n_units, k)."""
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    index = space.index
    for unit in units:
        tokens = _as_tokens(unit)
        total = gram_count(len(tokens), space.ngram_max)
        if total:
            counts = Counter(g for g in iter_ngrams(tokens, space.ngram_max) if g in index)
            for g, c in counts.items():
                indices.append(index[g])
                data.append(c / total)
        indptr.append(len(indices))
    mat = sparse.csr_matrix(
        (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(indptr) - 1, space.k),
    )
    mat.sort_indices()
    return mat


def to_matrix(vectors: Sequence[FeatureVector], k: int) -> sparse.csr_matrix:
    rows, cols, vals = [], [], []
    for i, vec in enumerate(vectors):
        for col, val in vec.entries.items():
            if not 0 <= col < k:
                raise IndexError(f"feature column {col} outside space of size {k}")
            rows.append(i)
            cols.append(col)
            vals.append(val)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(len(vectors), k), dtype=float)
