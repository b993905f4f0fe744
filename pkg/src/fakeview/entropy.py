"""Shannon entropy (nats) of access-matrix rows and columns.

Row entropy of an IP (or user) measures how spread its views are over
videos; column entropy of a video measures how spread its views are over
source IPs. Also provides the closed-form one-view updates used by the
streaming detector and the limit value a popularity distribution implies.
"""

from __future__ import annotations

import math
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import InvalidEntropyError, NotFoundError

# Rows longer than this are summed with math.fsum.
COMPENSATED_SUM_THRESHOLD = 10_000
_BOUND_SLACK = 1e-9


class EntityProfile(NamedTuple):
    entity: str
    total_views: int
    distinct: int
    entropy: float


def _clamp(h: float, support: int) -> float:
    if h <= 0.0:
        return 0.0
    upper = math.log(support)
    return upper if h > upper else h


def _sum_clogc(values) -> float:
    if len(values) > COMPENSATED_SUM_THRESHOLD:
        return math.fsum(c * math.log(c) for c in values if c > 1)
    return sum(c * math.log(c) for c in values if c > 1)


def entropy(counts) -> float:
    """Entropy of a count vector, ``-sum (c/T) ln (c/T)`` over positive entries.

    Empty vectors, all-zero vectors, and single positive entries give 0.
    """
    if isinstance(counts, Mapping):
        counts = counts.values()
    if isinstance(counts, np.ndarray):
        counts = counts.tolist()
    positive = [c for c in counts if c > 0]
    if len(positive) <= 1:
        return 0.0
    total = sum(positive)
    h = math.log(total) - _sum_clogc(positive) / total
    return _clamp(h, len(positive))


def _row_entropy(row: dict, total: int) -> float:
    if len(row) <= 1:
        return 0.0
    h = math.log(total) - _sum_clogc(row.values()) / total
    return _clamp(h, len(row))


def row_entropy(matrix, entity) -> float:
    """IP entropy (IP matrix) or user entropy (user matrix) of one row."""
    row = matrix.row(entity)
    return _row_entropy(row, matrix.row_totals[entity])


def col_entropy(matrix, video_id: str) -> float:
    """Video entropy: spread of one video's views over the matrix rows."""
    col = matrix.column(video_id)
    return _row_entropy(col, matrix.col_totals[video_id])


def row_profiles(matrix) -> dict:
    """``{entity: EntityProfile}`` for every row of the matrix."""
    totals = matrix.row_totals
    return {
        e: EntityProfile(e, totals[e], len(row), _row_entropy(row, totals[e]))
        for e, row in matrix.rows.items()
    }


def col_profiles(matrix) -> dict:
    """``{video: EntityProfile}`` for every column; ``distinct`` counts rows."""
    totals = matrix.col_totals
    return {
        v: EntityProfile(v, totals[v], len(col), _row_entropy(col, totals[v]))
        for v, col in matrix.columns().items()
    }


def entropy_after_new_item(h: float, w: int) -> float:
    """Entropy after one view lands on a previously unseen item.

    ``h`` is the current entropy of a count vector totalling ``w`` views.
    """
    if w < 1 or int(w) != w:
        raise ValueError(f"w must be a positive integer, got {w!r}")
    if h < 0 or h > math.log(w) + _BOUND_SLACK:
        raise InvalidEntropyError(f"entropy {h} outside [0, ln {w}]")
    w1 = w + 1
    # (w/(w+1)) h - (w/(w+1)) ln(w/(w+1)) - (1/(w+1)) ln(1/(w+1))
    return (w * h + w * math.log1p(1.0 / w) + math.log(w1)) / w1


def entropy_after_repeat_item(counts, k) -> float:
    """Entropy after item ``k`` (index or mapping key) gains one more view."""
    if isinstance(counts, Mapping):
        if k not in counts or counts[k] < 1:
            raise NotFoundError(f"item {k!r} has no views")
        values = list(counts.values())
        c = counts[k]
    else:
        values = list(counts)
        if not (0 <= k < len(values)) or values[k] < 1:
            raise NotFoundError(f"item {k!r} has no views")
        c = values[k]
    acc = RunningEntropy.from_counts(values)
    acc.add(c)
    return acc.value


class RunningEntropy:
    """Entropy of a growing count vector, updated in O(1) per view.

    Keeps the total ``T`` and ``S = sum c ln c``; entropy is ``ln T - S/T``.
    Callers pass the item's count *before* the new view (0 for a new item).
    """

    __slots__ = ("total", "support", "_s")

    def __init__(self):
        self.total = 0
        self.support = 0
        self._s = 0.0

    @classmethod
    def from_counts(cls, counts: Iterable[int]) -> "RunningEntropy":
        acc = cls()
        positive = [c for c in counts if c > 0]
        acc.total = sum(positive)
        acc.support = len(positive)
        acc._s = _sum_clogc(positive)
        return acc

    def add(self, previous_count: int) -> float:
        c = previous_count
        if c < 0:
            raise ValueError("previous_count must be >= 0")
        if c == 0:
            self.support += 1
        else:
            self._s += (c + 1) * math.log(c + 1) - (c * math.log(c) if c > 1 else 0.0)
        self.total += 1
        return self.value

    @property
    def value(self) -> float:
        if self.support <= 1:
            return 0.0
        return _clamp(math.log(self.total) - self._s / self.total, self.support)


class PopularityDistribution:
    """Probabilities over keys (videos for popularity, IPs for IP popularity)."""

    def __init__(self, weights):
        if isinstance(weights, Mapping):
            keys = list(weights.keys())
            probs = np.asarray([weights[k] for k in keys], dtype=float)
        else:
            probs = np.asarray(list(weights), dtype=float)
            keys = list(range(len(probs)))
        if probs.size == 0:
            raise ValueError("distribution must have at least one key")
        if np.any(~np.isfinite(probs)) or np.any(probs <= 0):
            raise ValueError("all probabilities must be finite and > 0")
        if abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        self.keys = keys
        self.probs = probs

    @classmethod
    def normalized(cls, weights) -> "PopularityDistribution":
        if isinstance(weights, Mapping):
            total = float(sum(weights.values()))
            return cls({k: v / total for k, v in weights.items()})
        arr = np.asarray(list(weights), dtype=float)
        return cls(arr / arr.sum())

    @classmethod
    def zipf(cls, n: int, exponent: float, keys: Sequence = None) -> "PopularityDistribution":
        """Rank-based Zipf: weight of rank r proportional to ``r ** -exponent``."""
        if n < 1:
            raise ValueError("n must be >= 1")
        if exponent <= 0:
            raise ValueError("Zipf exponent must be > 0")
        w = np.arange(1, n + 1, dtype=float) ** -exponent
        dist = cls(w / w.sum())
        if keys is not None:
            if len(keys) != n:
                raise ValueError("keys length must equal n")
            dist.keys = list(keys)
        return dist

    def __len__(self):
        return len(self.keys)

    def as_dict(self) -> dict:
        return dict(zip(self.keys, self.probs.tolist()))

    def sample_indices(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(len(self.probs), size=size, p=self.probs)


def limit_entropy(p) -> float:
    """``-sum p ln p``: the value row or column entropy settles to as views pile up."""
    if not isinstance(p, PopularityDistribution):
        p = PopularityDistribution(p)
    probs = p.probs
    return max(0.0, float(-np.sum(probs * np.log(probs))))
