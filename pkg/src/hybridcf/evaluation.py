"""Experiment protocol: user split, k-fold CV with item hold-out epochs, error and
ranking metrics, and the exhaustive metric x neighbors x alpha grid search."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyResultError, HybridCFError
from .predict import (
    HybridConfig,
    RecommendationList,
    TrainStats,
    alpha_label,
    blend,
    item_component,
    parse_alpha,
    user_component,
)
from .ratings import RatingsMatrix
from .similarity import DEFAULT_MIN_OVERLAP, SimilarityMetric

log = logging.getLogger(__name__)

DEFAULT_ALPHAS = tuple(
    float(Fraction(a)) for a in ("0", "1/8", "1/7", "1/6", "1/5", "1/4", "1/3", "1/2", "2/3", "1")
)
DEFAULT_NEIGHBORS = (3, 5, 7, 11)
DEFAULT_METRICS = (SimilarityMetric.EUCLIDEAN, SimilarityMetric.COSINE, SimilarityMetric.PEARSON)
DEFAULT_K = 5
DEFAULT_THRESHOLD = 3.0


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.75
    item_holdout_fraction: float = 0.20
    holdout_epochs: int = 5
    cv_folds: int = 10
    seed: int = 0
    # explicit user counts override train_fraction (e.g. 947/290)
    train_count: int | None = None
    test_count: int | None = None

    def __post_init__(self):
        for name in ("train_fraction", "item_holdout_fraction"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {v}")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")
        if self.holdout_epochs < 1:
            raise ValueError("holdout_epochs must be >= 1")


@dataclass(frozen=True)
class GridSpec:
    metrics: tuple[SimilarityMetric, ...] = DEFAULT_METRICS
    neighbor_counts: tuple[int, ...] = DEFAULT_NEIGHBORS
    alphas: tuple[float, ...] = DEFAULT_ALPHAS

    def __post_init__(self):
        object.__setattr__(self, "metrics", tuple(SimilarityMetric(m) for m in self.metrics))
        object.__setattr__(self, "neighbor_counts", tuple(int(n) for n in self.neighbor_counts))
        object.__setattr__(self, "alphas", tuple(parse_alpha(a) for a in self.alphas))
        if not (self.metrics and self.neighbor_counts and self.alphas):
            raise ValueError("grid sets must be non-empty")
        if any(n < 1 for n in self.neighbor_counts):
            raise ValueError("neighbor counts must be >= 1")
        if any(not 0.0 <= a <= 1.0 for a in self.alphas):
            raise ValueError("alphas must lie in [0, 1]")
        for name in ("metrics", "neighbor_counts", "alphas"):
            v = getattr(self, name)
            if len(set(v)) != len(v):
                raise ValueError(f"duplicate entries in {name}")

    def cells(self) -> list[HybridConfig]:
        return [
            HybridConfig(m, n, a) for m in self.metrics for n in self.neighbor_counts for a in self.alphas
        ]

    def to_dict(self) -> dict:
        return {
            "metrics": [m.value for m in self.metrics],
            "neighbor_counts": list(self.neighbor_counts),
            "alphas": [alpha_label(a) for a in self.alphas],
        }


# --- splitting -----------------------------------------------------------------


def _floor(frac: float, n: int) -> int:
    return math.floor(frac * n + 1e-9)


def split_user_indices(n_users: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    if n_users < 2:
        raise EmptyResultError("need at least two users to split")
    if spec.train_count is not None or spec.test_count is not None:
        n_train = spec.train_count if spec.train_count is not None else n_users - spec.test_count
        n_test = spec.test_count if spec.test_count is not None else n_users - n_train
        if n_train + n_test != n_users or n_train < 0 or n_test < 0:
            raise ValueError(f"counts {n_train}/{n_test} do not partition {n_users} users")
    else:
        n_train = _floor(spec.train_fraction, n_users)
        n_test = n_users - n_train
    if n_train == 0 or n_test == 0:
        raise EmptyResultError(f"split of {n_users} users leaves an empty side ({n_train}/{n_test})")
    perm = np.random.default_rng([spec.seed, 0]).permutation(n_users)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def split_users(m: RatingsMatrix, spec: SplitSpec) -> tuple[RatingsMatrix, RatingsMatrix]:
    """Seeded random partition of the users into train and test matrices."""
    tr, te = split_user_indices(m.shape[0], spec)
    return m.take_users(tr), m.take_users(te)


def cv_fold_indices(n_users: int, spec: SplitSpec) -> list[np.ndarray]:
    if n_users < spec.cv_folds:
        raise EmptyResultError(f"{n_users} training users cannot fill {spec.cv_folds} folds")
    perm = np.random.default_rng([spec.seed, 1]).permutation(n_users)
    return [np.sort(f) for f in np.array_split(perm, spec.cv_folds)]


def holdout_item_indices(n_items: int, spec: SplitSpec, epoch: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0 <= epoch < spec.holdout_epochs:
        raise ValueError(f"epoch {epoch} outside 0..{spec.holdout_epochs - 1}")
    n_test = _floor(spec.item_holdout_fraction, n_items)
    if n_test == 0:
        raise EmptyResultError(f"hold-out fraction {spec.item_holdout_fraction} selects no item of {n_items}")
    if n_test >= n_items:
        raise EmptyResultError("hold-out leaves no known items")
    chosen = np.random.default_rng([spec.seed, 2, epoch]).choice(n_items, size=n_test, replace=False)
    test = np.sort(chosen)
    known = np.setdiff1d(np.arange(n_items), test)
    return known, test


def holdout_items(m: RatingsMatrix, spec: SplitSpec, epoch: int) -> tuple[list[str], list[str]]:
    """(known items, test items) for one hold-out epoch; the draw depends only on seed and epoch."""
    known, test = holdout_item_indices(m.shape[1], spec, epoch)
    return [m.items[j] for j in known], [m.items[j] for j in test]


# --- metrics -------------------------------------------------------------------


def _pairs(pairs) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs, dtype=np.float64)
    if arr.size == 0:
        raise EmptyResultError("no rating pairs to score")
    arr = arr.reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


def mae(pairs: Iterable[tuple[float, float]]) -> float:
    """Mean absolute error over ``(predicted, actual)`` pairs."""
    p, q = _pairs(pairs)
    return float(np.abs(p - q).sum() / p.size)


def relative_error(pairs: Iterable[tuple[float, float]], *, with_counts: bool = False):
    """Mean of ``|p - q| / q`` over pairs with a positive actual rating.

    Pairs with ``q == 0`` are excluded; ``with_counts=True`` returns
    ``(value, n_used, n_excluded)``.
    """
    p, q = _pairs(pairs)
    keep = q > 0
    if not keep.any():
        raise EmptyResultError("every pair has a zero actual rating; relative error undefined")
    value = float((np.abs(p[keep] - q[keep]) / q[keep]).sum() / keep.sum())
    if with_counts:
        return value, int(keep.sum()), int((~keep).sum())
    return value


def precision_recall_at_k(
    recs: RecommendationList,
    actuals: Mapping[str, float],
    k: int = DEFAULT_K,
    relevance_threshold: float = DEFAULT_THRESHOLD,
) -> tuple[float, float | None]:
    """Precision@k and recall@k of one user's ranked predictions.

    An item is relevant when its actual rating is at least the threshold.  Recall
    is ``None`` when none of the recommended test items is relevant.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(recs) == 0:
        raise EmptyResultError("no recommendations to score")
    relevant = [actuals[r.item_id] >= relevance_threshold for r in recs]
    hits = sum(relevant[:k])
    shown = min(k, len(recs))
    total = sum(relevant)
    return hits / shown, (hits / total if total else None)


def _precision_recall_arrays(pred: np.ndarray, actual: np.ndarray, k: int, threshold: float):
    # items are already in ascending item order, so a stable sort keeps index tie-breaks
    order = np.argsort(-pred, kind="stable")
    rel = actual[order] >= threshold
    hits = int(rel[:k].sum())
    total = int(rel.sum())
    return hits / min(k, pred.size), (hits / total if total else None)


# --- grid search ---------------------------------------------------------------


@dataclass
class _UserTask:
    targets: np.ndarray
    actual: np.ndarray
    comps: dict  # metric -> (r_u, fb_u, r_i, fb_i), each (len(ns), len(targets))


@dataclass
class _Scores:
    mae: float
    relative_error: float | None
    precision: float | None
    recall: float | None
    n_pairs: int
    n_zero_actual: int


def _component_task(
    train: np.ndarray,
    test: np.ndarray,
    test_items: np.ndarray,
    metrics: Sequence[SimilarityMetric],
    ns: Sequence[int],
    min_overlap: int,
) -> tuple[list[_UserTask], TrainStats]:
    """Component predictions for every test user on one (train, test, hold-out) task."""
    stats = TrainStats(train)
    known = np.setdiff1d(np.arange(train.shape[1]), test_items).astype(np.intp)
    tasks = []
    for row in test:
        targets = test_items[~np.isnan(row[test_items])]
        if targets.size == 0:
            continue
        vec = row.copy()
        vec[test_items] = np.nan  # hold-out targets are never visible to the predictors
        comps = {}
        for metric in metrics:
            r_u, fb_u = user_component(train, stats, vec, known, targets, metric, ns, min_overlap)
            r_i, fb_i = item_component(train, stats, vec, known, targets, metric, ns, min_overlap)
            comps[metric] = (r_u, fb_u, r_i, fb_i)
        tasks.append(_UserTask(targets, row[targets], comps))
    return tasks, stats


def _score(preds: list[np.ndarray], actuals: list[np.ndarray], k: int, threshold: float) -> _Scores:
    p = np.concatenate(preds)
    q = np.concatenate(actuals)
    err = np.abs(p - q)
    keep = q > 0
    rel = float((err[keep] / q[keep]).sum() / keep.sum()) if keep.any() else None
    precs, recs = [], []
    for pu, qu in zip(preds, actuals):
        pr, rc = _precision_recall_arrays(pu, qu, k, threshold)
        precs.append(pr)
        if rc is not None:
            recs.append(rc)
    return _Scores(
        mae=float(err.sum() / err.size),
        relative_error=rel,
        precision=float(np.mean(precs)),
        recall=float(np.mean(recs)) if recs else None,
        n_pairs=int(p.size),
        n_zero_actual=int((~keep).sum()),
    )


def _score_cells(tasks: list[_UserTask], grid: GridSpec, k: int, threshold: float) -> dict:
    out = {}
    for metric in grid.metrics:
        for ni, n in enumerate(grid.neighbor_counts):
            for alpha in grid.alphas:
                preds = []
                for t in tasks:
                    r_u, fb_u, r_i, fb_i = t.comps[metric]
                    preds.append(blend(alpha, r_u[ni], fb_u[ni], r_i[ni], fb_i[ni])[0])
                out[(metric, n, alpha)] = _score(preds, [t.actual for t in tasks], k, threshold)
    return out


def _mean_defined(values) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


@dataclass(frozen=True)
class GridRow:
    config: HybridConfig
    mae: float
    relative_error: float | None
    precision_at_k: float | None
    recall_at_k: float | None

    def to_dict(self) -> dict:
        return {
            **self.config.to_dict(),
            "mae": self.mae,
            "relative_error": self.relative_error,
            "precision_at_k": self.precision_at_k,
            "recall_at_k": self.recall_at_k,
        }


@dataclass(frozen=True)
class TestResult:
    """Scores of one configuration on held-out test users, averaged over hold-out epochs."""

    config: HybridConfig
    mae: float
    relative_error: float | None
    precision_at_k: float | None
    recall_at_k: float | None
    baseline_mae: float
    n_pairs: int
    n_zero_actual_excluded: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["config"] = self.config.to_dict()
        return d


@dataclass(frozen=True)
class EvaluationReport:
    rows: tuple[GridRow, ...]
    best: HybridConfig
    k: int
    relevance_threshold: float
    cv_baseline_mae: float
    test: TestResult | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def best_row(self) -> GridRow:
        return next(r for r in self.rows if r.config == self.best)

    def weights_analysis(self) -> list[GridRow]:
        """Best (lowest CV MAE) row for each alpha, in grid order."""
        best: dict[float, GridRow] = {}
        for r in self.rows:
            a = r.config.alpha
            if a not in best or r.mae < best[a].mae:
                best[a] = r
        return list(best.values())

    def metric_comparison(self) -> list[GridRow]:
        """Best row per (metric, alpha) over neighbor counts."""
        best: dict = {}
        for r in self.rows:
            key = (r.config.metric, r.config.alpha)
            if key not in best or r.mae < best[key].mae:
                best[key] = r
        return list(best.values())

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "k": self.k,
            "relevance_threshold": self.relevance_threshold,
            "best": {
                **self.best.to_dict(),
                "cv": self.best_row.to_dict(),
                "test": self.test.to_dict() if self.test is not None else None,
            },
            "cv_baseline_mae": self.cv_baseline_mae,
            "weights_analysis": [
                {"alpha": alpha_label(r.config.alpha), "metric": r.config.metric.value,
                 "n_neighbors": r.config.n_neighbors, "mae": r.mae}
                for r in self.weights_analysis()
            ],
            "rows": [r.to_dict() for r in self.rows],
        }

    def write_csv(self, path: str | Path) -> None:
        """One row per grid cell with cross-validated scores."""
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "n", "alpha", "mae", "rel_err", "precision_at_k", "recall_at_k"])
            for r in self.rows:
                w.writerow([
                    r.config.metric.value, r.config.n_neighbors, alpha_label(r.config.alpha),
                    _fmt(r.mae), _fmt(r.relative_error), _fmt(r.precision_at_k), _fmt(r.recall_at_k),
                ])

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n", encoding="utf-8")

    def write_weights_analysis(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["alpha", "best_metric", "best_n", "mae"])
            for r in self.weights_analysis():
                w.writerow([alpha_label(r.config.alpha), r.config.metric.value, r.config.n_neighbors, _fmt(r.mae)])

    def write_metric_comparison(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "alpha", "best_n", "mae"])
            for r in self.metric_comparison():
                w.writerow([r.config.metric.value, alpha_label(r.config.alpha), r.config.n_neighbors, _fmt(r.mae)])

    def format_table(self) -> str:
        """Plain-text MAE table: one line per (metric, n), one column per alpha."""
        alphas = list(dict.fromkeys(r.config.alpha for r in self.rows))
        head = ["similarity", "n"] + [f"MAE_{alpha_label(a)}" for a in alphas]
        lines = ["  ".join(f"{h:>10}" for h in head)]
        by_key: dict = {}
        for r in self.rows:
            by_key.setdefault((r.config.metric, r.config.n_neighbors), {})[r.config.alpha] = r
        for (metric, n), cells in by_key.items():
            vals = [f"{cells[a].mae:.4f}" + ("*" if cells[a].config == self.best else "") for a in alphas]
            lines.append("  ".join(f"{v:>10}" for v in [metric.title, str(n), *vals]))
        return "\n".join(lines)


def _fmt(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def evaluate_config(
    train: RatingsMatrix,
    test: RatingsMatrix,
    config: HybridConfig,
    split: SplitSpec = SplitSpec(),
    k: int = DEFAULT_K,
    relevance_threshold: float = DEFAULT_THRESHOLD,
    min_overlap: int = DEFAULT_MIN_OVERLAP,
) -> TestResult:
    """Score ``config`` on ``test`` users using ``train`` as the neighbor pool.

    Runs every hold-out epoch; MAE and the other scores are averaged per epoch.
    """
    if train.items != test.items:
        raise ValueError("train and test matrices must share the item columns")
    per_epoch = []
    baselines = []
    for epoch in range(split.holdout_epochs):
        _, test_items = holdout_item_indices(train.shape[1], split, epoch)
        tasks, stats = _component_task(
            train.values, test.values, test_items, [config.metric], [config.n_neighbors], min_overlap
        )
        if not tasks:
            continue
        grid = GridSpec((config.metric,), (config.n_neighbors,), (config.alpha,))
        per_epoch.append(_score_cells(tasks, grid, k, relevance_threshold)[(config.metric, config.n_neighbors, config.alpha)])
        baselines.append(_score([np.full(t.actual.size, stats.global_mean) for t in tasks],
                                [t.actual for t in tasks], k, relevance_threshold).mae)
    if not per_epoch:
        raise EmptyResultError("no test user has a rating on any held-out item")
    return TestResult(
        config=config,
        mae=float(np.mean([s.mae for s in per_epoch])),
        relative_error=_mean_defined(s.relative_error for s in per_epoch),
        precision_at_k=_mean_defined(s.precision for s in per_epoch),
        recall_at_k=_mean_defined(s.recall for s in per_epoch),
        baseline_mae=float(np.mean(baselines)),
        n_pairs=sum(s.n_pairs for s in per_epoch),
        n_zero_actual_excluded=sum(s.n_zero_actual for s in per_epoch),
    )


def grid_search(
    m: RatingsMatrix,
    split: SplitSpec = SplitSpec(),
    grid: GridSpec = GridSpec(),
    k: int = DEFAULT_K,
    relevance_threshold: float = DEFAULT_THRESHOLD,
    min_overlap: int = DEFAULT_MIN_OVERLAP,
    evaluate_test: bool = True,
) -> EvaluationReport:
    """Cross-validated search over every (metric, n, alpha) cell.

    The training users are split into ``cv_folds`` folds; each fold in turn plays
    the test users, for each hold-out epoch.  A cell's score is the unweighted
    mean over the fold-epoch tasks.  The lowest-MAE cell (first in grid order on
    ties) is then re-scored on the held-out test users.
    """
    train_m, test_m = split_users(m, split)
    folds = cv_fold_indices(train_m.shape[0], split)
    ns = sorted(grid.neighbor_counts)
    # _score_cells indexes components by position in grid.neighbor_counts
    ordered = GridSpec(grid.metrics, tuple(ns), grid.alphas)
    per_cell: dict = {}
    baselines = []
    values = train_m.values
    for f, fold in enumerate(folds):
        rest = np.setdiff1d(np.arange(values.shape[0]), fold)
        for epoch in range(split.holdout_epochs):
            _, test_items = holdout_item_indices(m.shape[1], split, epoch)
            try:
                tasks, stats = _component_task(values[rest], values[fold], test_items, grid.metrics, ns, min_overlap)
            except HybridCFError as exc:
                raise HybridCFError(f"grid task fold={f} epoch={epoch} failed: {exc}") from exc
            if not tasks:
                log.warning("fold %d epoch %d: no fold user rated a held-out item; task skipped", f, epoch)
                continue
            scores = _score_cells(tasks, ordered, k, relevance_threshold)
            for key, s in scores.items():
                per_cell.setdefault(key, []).append(s)
            baselines.append(_score([np.full(t.actual.size, stats.global_mean) for t in tasks],
                                    [t.actual for t in tasks], k, relevance_threshold).mae)
            log.debug("fold %d epoch %d done (%d users)", f, epoch, len(tasks))
    if not per_cell:
        raise EmptyResultError("cross-validation produced no scorable task")

    rows = []
    for cfg in grid.cells():
        key = (cfg.metric, cfg.n_neighbors, cfg.alpha)
        cell = per_cell[key]
        rows.append(GridRow(
            cfg,
            mae=float(np.mean([s.mae for s in cell])),
            relative_error=_mean_defined(s.relative_error for s in cell),
            precision_at_k=_mean_defined(s.precision for s in cell),
            recall_at_k=_mean_defined(s.recall for s in cell),
        ))
    best = min(rows, key=lambda r: r.mae).config  # min keeps the first on ties
    test = None
    if evaluate_test:
        test = evaluate_config(train_m, test_m, best, split, k, relevance_threshold, min_overlap)
    meta = {
        "seed": split.seed,
        "split": asdict(split),
        "grid": grid.to_dict(),
        "min_overlap": min_overlap,
        "dataset": {"users": m.shape[0], "items": m.shape[1], "fingerprint": m.fingerprint()},
        "train_users": train_m.shape[0],
        "test_users": test_m.shape[0],
        "cv_tasks": len(baselines),
    }
    return EvaluationReport(
        rows=tuple(rows),
        best=best,
        k=k,
        relevance_threshold=relevance_threshold,
        cv_baseline_mae=float(np.mean(baselines)),
        test=test,
        metadata=meta,
    )
