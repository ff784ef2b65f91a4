"""User-based, item-based and weighted hybrid rating prediction.

Every predictor answers "what would this user rate these held-out items", given
a training matrix and the user's ratings on the remaining (known) items.
Neighbor ratings are combined with a plain mean.  When no neighbor contributes
a rating, the prediction falls back to the item's training mean, then to the
global training mean.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyResultError, IngestError
from .ratings import MAX_RATING, MIN_RATING, DEFAULT_MAPPING, ItemCatalog, LabelMapping, RatingsMatrix
from .similarity import DEFAULT_MIN_OVERLAP, SimilarityFrame, SimilarityMetric


class Source(str, enum.Enum):
    USER_BASED = "user_based"
    ITEM_BASED = "item_based"
    HYBRID = "hybrid"
    FALLBACK = "fallback"


def alpha_label(alpha: float) -> str:
    """Short fraction label for a hybrid weight, e.g. ``0.25 -> "1/4"``."""
    f = Fraction(alpha).limit_denominator(1000)
    if float(f) != float(alpha):
        return repr(float(alpha))
    return str(f)


def parse_alpha(value) -> float:
    """Accept ``0.25``, ``"0.25"`` or ``"1/4"``."""
    if isinstance(value, str):
        return float(Fraction(value.strip()))
    return float(value)


@dataclass(frozen=True)
class HybridConfig:
    metric: SimilarityMetric
    n_neighbors: int
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "metric", SimilarityMetric(self.metric))
        object.__setattr__(self, "alpha", parse_alpha(self.alpha))
        if int(self.n_neighbors) != self.n_neighbors or self.n_neighbors < 1:
            raise ValueError("n_neighbors must be a positive integer")
        object.__setattr__(self, "n_neighbors", int(self.n_neighbors))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must satisfy 0 <= alpha <= 1")

    def to_dict(self) -> dict:
        return {
            "metric": self.metric.value,
            "n_neighbors": self.n_neighbors,
            "alpha": self.alpha,
            "alpha_label": alpha_label(self.alpha),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "HybridConfig":
        return cls(d["metric"], d["n_neighbors"], d.get("alpha_label", d["alpha"]))


@dataclass(frozen=True)
class Recommendation:
    item_id: str
    predicted_rating: float
    source: Source


class RecommendationList(tuple):
    """Recommendations sorted by predicted rating (descending), ties by item order."""

    def __new__(cls, entries: Iterable[Recommendation], order: Mapping[str, int] | None = None):
        entries = list(entries)
        if order is None:
            order = {r.item_id: i for i, r in enumerate(entries)}
        entries.sort(key=lambda r: (-r.predicted_rating, order[r.item_id]))
        return super().__new__(cls, entries)

    def as_dict(self) -> dict[str, float]:
        return {r.item_id: r.predicted_rating for r in self}

    def top(self, k: int) -> "RecommendationList":
        return RecommendationList(self[:k])

    def __repr__(self):
        return f"RecommendationList({list(self)!r})"


# --- shared numerical core -------------------------------------------------


class TrainStats:
    """Fallback means of a training matrix."""

    def __init__(self, values: np.ndarray):
        present = ~np.isnan(values)
        if values.shape[0] == 0 or not present.any():
            raise EmptyResultError("training matrix is empty")
        filled = np.where(present, values, 0.0)
        counts = present.sum(axis=0)
        self.global_mean = float(filled.sum() / present.sum())
        self.item_means = np.divide(
            filled.sum(axis=0), counts, out=np.full(values.shape[1], self.global_mean), where=counts > 0
        )


def _neighbor_means(R: np.ndarray, ns: Sequence[int], fallback: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean over the first ``n`` rows of ``R`` (skipping ``nan``) for each ``n``.

    Returns ``(preds, fell_back)`` of shape ``(len(ns), R.shape[1])``.
    """
    present = ~np.isnan(R)
    filled = np.where(present, R, 0.0)
    csum = np.cumsum(filled, axis=0)
    ccnt = np.cumsum(present, axis=0)
    preds = np.empty((len(ns), R.shape[1]))
    fell = np.empty((len(ns), R.shape[1]), dtype=bool)
    depth = R.shape[0]
    for k, n in enumerate(ns):
        m = min(n, depth)
        if m == 0:
            preds[k] = fallback
            fell[k] = True
            continue
        s, c = csum[m - 1], ccnt[m - 1]
        fell[k] = c == 0
        preds[k] = np.where(c > 0, s / np.maximum(c, 1), fallback)
    return np.clip(preds, MIN_RATING, MAX_RATING), fell


def user_component(
    train: np.ndarray,
    stats: TrainStats,
    test_vec: np.ndarray,
    known: np.ndarray,
    targets: np.ndarray,
    metric: SimilarityMetric,
    ns: Sequence[int],
    min_overlap: int = DEFAULT_MIN_OVERLAP,
) -> tuple[np.ndarray, np.ndarray]:
    """User-based predictions for ``targets`` at every neighbor count in ``ns``.

    ``test_vec`` must already have its held-out items masked.  Similarity is
    computed on the ``known`` item columns only, with the test user appended as
    the last row.  A test user with no known ratings gets fallback predictions.
    """
    n_train = train.shape[0]
    if np.isnan(test_vec[known]).all():
        # nothing to compare on: an imputed constant row would pick arbitrary neighbors
        return _neighbor_means(train[:0][:, targets], ns, stats.item_means[targets])
    frame = SimilarityFrame(np.vstack([train[:, known], test_vec[known][None, :]]), min_overlap=min_overlap)
    try:
        nb = frame.neighbors(n_train, metric, max(ns), candidates=np.arange(n_train))
        rows = np.asarray(nb.indices, dtype=np.intp)
    except EmptyResultError:
        rows = np.empty(0, dtype=np.intp)
    R = train[rows][:, targets]
    return _neighbor_means(R, ns, stats.item_means[targets])


def item_component(
    train: np.ndarray,
    stats: TrainStats,
    test_vec: np.ndarray,
    known: np.ndarray,
    targets: np.ndarray,
    metric: SimilarityMetric,
    ns: Sequence[int],
    min_overlap: int = DEFAULT_MIN_OVERLAP,
) -> tuple[np.ndarray, np.ndarray]:
    """Item-based predictions for ``targets`` at every neighbor count in ``ns``.

    Items are compared column-wise over the training users plus the test user
    row; each target is ranked against the ``known`` items only and predicted
    as the mean of the test user's own ratings on its nearest items.
    """
    frame = SimilarityFrame(np.vstack([train, test_vec[None, :]]).T, min_overlap=min_overlap)
    preds = np.empty((len(ns), len(targets)))
    fell = np.empty((len(ns), len(targets)), dtype=bool)
    for t, j in enumerate(targets):
        try:
            nb = frame.neighbors(int(j), metric, max(ns), candidates=known)
            cols = np.asarray(nb.indices, dtype=np.intp)
        except EmptyResultError:
            cols = np.empty(0, dtype=np.intp)
        own = test_vec[cols][:, None]
        p, f = _neighbor_means(own, ns, stats.item_means[[j]])
        preds[:, t], fell[:, t] = p[:, 0], f[:, 0]
    return preds, fell


def blend(alpha: float, r_u, fb_u, r_i, fb_i) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Weighted hybrid of component predictions.

    A component with weight 0 is ignored.  If exactly one weighted component
    had to fall back to training means, the other one is used alone.  Returns
    ``(prediction, any_fallback, substituted)`` arrays.
    """
    r_u, r_i = np.asarray(r_u, dtype=np.float64), np.asarray(r_i, dtype=np.float64)
    fb_u, fb_i = np.asarray(fb_u, dtype=bool), np.asarray(fb_i, dtype=bool)
    if alpha == 1.0:
        return r_u.copy(), fb_u.copy(), np.zeros_like(fb_u)
    if alpha == 0.0:
        return r_i.copy(), fb_i.copy(), np.zeros_like(fb_i)
    mixed = alpha * r_u + (1.0 - alpha) * r_i
    only_i = fb_u & ~fb_i
    only_u = fb_i & ~fb_u
    out = np.where(only_i, r_i, np.where(only_u, r_u, mixed))
    return np.clip(out, MIN_RATING, MAX_RATING), fb_u | fb_i, only_i | only_u


# --- public predictors -----------------------------------------------------


def _prepare(test_user, train: RatingsMatrix, test_items) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if train.shape[0] == 0 or train.shape[1] == 0:
        raise EmptyResultError("training matrix is empty")
    vec = np.array(test_user, dtype=np.float64).reshape(-1)
    if vec.size != train.shape[1]:
        raise ValueError(f"test user vector has {vec.size} entries, train has {train.shape[1]} items")
    targets = []
    for it in test_items:
        if isinstance(it, (int, np.integer)):
            targets.append(int(it))
        else:
            try:
                targets.append(train.item_index(it))
            except ValueError:
                raise KeyError(f"test item {it!r} not in the training item set") from None
    targets_arr = np.array(sorted(set(targets)), dtype=np.intp)
    vec[targets_arr] = np.nan
    known = np.setdiff1d(np.arange(train.shape[1]), targets_arr).astype(np.intp)
    return vec, known, targets_arr


def _as_list(train: RatingsMatrix, targets, preds, sources) -> RecommendationList:
    order = {it: i for i, it in enumerate(train.items)}
    recs = [
        Recommendation(train.items[j], float(p), s) for j, p, s in zip(targets, preds, sources)
    ]
    return RecommendationList(recs, order)


def predict_user_based(
    test_user, train: RatingsMatrix, test_items, metric: SimilarityMetric, n: int,
    *, min_overlap: int = DEFAULT_MIN_OVERLAP,
) -> RecommendationList:
    metric = SimilarityMetric(metric)
    vec, known, targets = _prepare(test_user, train, test_items)
    if targets.size == 0:
        return RecommendationList([])
    stats = TrainStats(train.values)
    p, fb = user_component(train.values, stats, vec, known, targets, metric, [n], min_overlap)
    src = [Source.FALLBACK if f else Source.USER_BASED for f in fb[0]]
    return _as_list(train, targets, p[0], src)


def predict_item_based(
    test_user, train: RatingsMatrix, test_items, metric: SimilarityMetric, n: int,
    *, min_overlap: int = DEFAULT_MIN_OVERLAP,
) -> RecommendationList:
    metric = SimilarityMetric(metric)
    vec, known, targets = _prepare(test_user, train, test_items)
    if targets.size == 0:
        return RecommendationList([])
    stats = TrainStats(train.values)
    p, fb = item_component(train.values, stats, vec, known, targets, metric, [n], min_overlap)
    src = [Source.FALLBACK if f else Source.ITEM_BASED for f in fb[0]]
    return _as_list(train, targets, p[0], src)


def predict_hybrid(
    test_user, train: RatingsMatrix, test_items, config: HybridConfig,
    *, min_overlap: int = DEFAULT_MIN_OVERLAP,
) -> RecommendationList:
    """``alpha * user_based + (1 - alpha) * item_based`` per item."""
    if config.alpha == 1.0:
        return predict_user_based(test_user, train, test_items, config.metric, config.n_neighbors,
                                  min_overlap=min_overlap)
    if config.alpha == 0.0:
        return predict_item_based(test_user, train, test_items, config.metric, config.n_neighbors,
                                  min_overlap=min_overlap)
    vec, known, targets = _prepare(test_user, train, test_items)
    if targets.size == 0:
        return RecommendationList([])
    stats = TrainStats(train.values)
    ns = [config.n_neighbors]
    r_u, fb_u = user_component(train.values, stats, vec, known, targets, config.metric, ns, min_overlap)
    r_i, fb_i = item_component(train.values, stats, vec, known, targets, config.metric, ns, min_overlap)
    r, fell, _ = blend(config.alpha, r_u[0], fb_u[0], r_i[0], fb_i[0])
    src = [Source.FALLBACK if f else Source.HYBRID for f in fell]
    return _as_list(train, targets, r, src)


def cold_start_profile(
    responses: Mapping[str, str],
    mapping: LabelMapping = DEFAULT_MAPPING,
    items: Sequence[str] | ItemCatalog | None = None,
    catalog: ItemCatalog | None = None,
) -> np.ndarray:
    """Rating vector for a new user from their questionnaire answers.

    ``items`` fixes the vector layout (usually ``train.items``); unanswered
    items and sentinel answers are missing.  Keys must be known to
    ``catalog`` (or to ``items`` when no catalog is given).
    """
    if isinstance(items, ItemCatalog):
        items = items.item_ids
    if items is None:
        if catalog is None:
            raise ValueError("need items or a catalog to lay out the profile")
        items = catalog.item_ids
    items = list(items)
    known_ids = set(catalog.item_ids) if catalog is not None else set(items)
    unknown = [k for k in responses if k not in known_ids]
    if unknown:
        raise IngestError(f"profile references unknown item(s) {unknown}")
    pos = {it: j for j, it in enumerate(items)}
    vec = np.full(len(items), np.nan)
    for key, answer in responses.items():
        if key not in pos:
            continue  # a catalog item that is not recommended (filtered or a difficulty)
        try:
            vec[pos[key]] = mapping.parse_cell(str(answer))
        except KeyError:
            raise IngestError(f"profile item {key!r}: unknown answer {answer!r}") from None
    return vec
