"""Similarity / distance measures and nearest-neighbor selection.

Pearson works on raw vectors with missing entries (pairwise-complete positions).
Euclidean and cosine distances work on dense vectors, so a frame is mean-imputed
row-wise before a kNN query is run against it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import EmptyResultError
from .ratings import RatingsMatrix, impute_rows

DEFAULT_MIN_OVERLAP = 2
# scores equal after snapping to a 1e-10 grid count as tied; ties go to the lower index
TIE_SCALE = 1e10


class SimilarityMetric(str, enum.Enum):
    PEARSON = "pearson"
    EUCLIDEAN = "euclidean"
    COSINE = "cosine"

    @property
    def is_distance(self) -> bool:
        return self is not SimilarityMetric.PEARSON

    @property
    def title(self) -> str:
        return self.value.capitalize()


def _vec(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float64).reshape(-1)


_ONE = np.zeros(1, dtype=np.intp)


def pearson(x, y, min_overlap: int = DEFAULT_MIN_OVERLAP) -> float | None:
    """Pearson correlation over positions where both vectors are present.

    Returns ``None`` when fewer than ``min_overlap`` positions overlap or either
    restricted vector is constant.
    """
    x, y = _vec(x), _vec(y)
    if x.shape != y.shape:
        raise ValueError("vectors must share an index space")
    if min_overlap < 2:
        raise ValueError("min_overlap must be >= 2")
    r = kernels.pearson_scores(x[None, :], y, _ONE, min_overlap)[0]
    return None if np.isnan(r) else float(r)


def euclidean(x, y) -> float:
    x, y = _vec(x), _vec(y)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    return float(kernels.euclidean_scores(x[None, :], y, _ONE)[0])


def cosine(x, y) -> float | None:
    """Cosine distance ``1 - cos(x, y)`` in [0, 2]; ``None`` if either vector is zero."""
    x, y = _vec(x), _vec(y)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    c = kernels.cosine_scores(x[None, :], y, _ONE)[0]
    return None if np.isnan(c) else float(c)


@dataclass(frozen=True)
class NeighborSet:
    """Neighbors of one query, most similar first.

    ``indices`` are row positions in the frame the set was computed on; ``ids``
    the matching entity ids when the frame had them.
    """

    metric: SimilarityMetric
    indices: tuple[int, ...]
    scores: tuple[float, ...]
    ids: tuple | None = None

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def entries(self) -> list[tuple]:
        keys = self.ids if self.ids is not None else self.indices
        return list(zip(keys, self.scores))

    def head(self, n: int) -> "NeighborSet":
        return NeighborSet(
            self.metric,
            self.indices[:n],
            self.scores[:n],
            None if self.ids is None else self.ids[:n],
        )


def rank(scores: np.ndarray, candidates: np.ndarray, metric: SimilarityMetric) -> tuple[np.ndarray, np.ndarray]:
    """Order ``candidates`` by score (distance ascending / correlation descending).

    Absent (``nan``) scores are dropped.  Ties break on ascending candidate index.
    """
    ok = ~np.isnan(scores)
    scores, candidates = scores[ok], candidates[ok]
    key = np.rint(scores * TIE_SCALE) / TIE_SCALE
    if not metric.is_distance:
        key = -key
    order = np.lexsort((candidates, key))
    return candidates[order], scores[order]


class SimilarityFrame:
    """Entities as rows of a rating frame, with a lazily imputed dense copy."""

    def __init__(self, values, ids: Sequence | None = None, min_overlap: int = DEFAULT_MIN_OVERLAP):
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("frame must be 2-D")
        self.ids = tuple(ids) if ids is not None else None
        self.min_overlap = min_overlap
        self._dense: np.ndarray | None = None

    @property
    def dense(self) -> np.ndarray:
        if self._dense is None:
            self._dense = np.ascontiguousarray(impute_rows(self.values))
        return self._dense

    def _candidates(self, query: int, candidates) -> np.ndarray:
        if candidates is None:
            cand = np.arange(self.values.shape[0], dtype=np.intp)
        else:
            cand = np.asarray(candidates, dtype=np.intp).reshape(-1)
        return np.ascontiguousarray(cand[cand != query])

    def scores(self, query: int, metric: SimilarityMetric, candidates=None) -> tuple[np.ndarray, np.ndarray]:
        """(candidates, raw scores) for ``query`` against every candidate row."""
        metric = SimilarityMetric(metric)
        cand = self._candidates(query, candidates)
        if metric is SimilarityMetric.PEARSON:
            s = kernels.pearson_scores(self.values, self.values[query], cand, self.min_overlap)
        elif metric is SimilarityMetric.EUCLIDEAN:
            s = kernels.euclidean_scores(self.dense, self.dense[query], cand)
        else:
            s = kernels.cosine_scores(self.dense, self.dense[query], cand)
        return cand, s

    def neighbors(self, query: int, metric: SimilarityMetric, n_neighbors: int, candidates=None) -> NeighborSet:
        if n_neighbors < 1:
            raise ValueError("n_neighbors must be >= 1")
        metric = SimilarityMetric(metric)
        cand, s = self.scores(query, metric, candidates)
        idx, sc = rank(s, cand, metric)
        if idx.size == 0:
            who = self.ids[query] if self.ids is not None else query
            raise EmptyResultError(
                f"no rankable neighbor for {who!r} under {metric.value} "
                f"({cand.size} candidates, all with undefined similarity)"
            )
        idx, sc = idx[:n_neighbors], sc[:n_neighbors]
        ids = tuple(self.ids[i] for i in idx) if self.ids is not None else None
        return NeighborSet(metric, tuple(int(i) for i in idx), tuple(float(v) for v in sc), ids)


def compute_similarities(
    data,
    query,
    metric: SimilarityMetric,
    n_neighbors: int,
    *,
    candidates=None,
    min_overlap: int = DEFAULT_MIN_OVERLAP,
) -> NeighborSet:
    """The ``n_neighbors`` rows of ``data`` most similar to row ``query``.

    ``data`` is a :class:`RatingsMatrix` (rows = users; ``query`` may be a user
    id) or a 2-D array whose rows are the entities to compare.  Pass
    ``candidates`` to restrict which rows may be returned.
    """
    if isinstance(data, RatingsMatrix):
        frame = SimilarityFrame(data.values, data.users, min_overlap)
        if isinstance(query, str):
            query = data.user_index(query)
    else:
        frame = SimilarityFrame(data, min_overlap=min_overlap)
    if not 0 <= int(query) < frame.values.shape[0]:
        raise IndexError(f"query row {query} outside frame")
    return frame.neighbors(int(query), metric, n_neighbors, candidates)
