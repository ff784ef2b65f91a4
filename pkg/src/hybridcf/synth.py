"""Seeded synthetic rating matrices with planted user clusters and item groups."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .ratings import MAX_RATING, MIN_RATING, CatalogEntry, ItemCatalog, ItemKind, RatingsMatrix


@dataclass(frozen=True)
class SynthSpec:
    n_users: int = 200
    n_items: int = 38
    user_clusters: int = 2
    item_groups: int = 2
    # user_clusters x item_groups base ratings; None -> evenly spread default
    affinity: tuple[tuple[float, ...], ...] | None = None
    noise_sd: float = 0.5
    missing_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("n_users", "n_items", "user_clusters", "item_groups"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ValueError("missing_rate must be in [0, 1)")
        if self.affinity is not None:
            object.__setattr__(self, "affinity", tuple(tuple(float(v) for v in row) for row in self.affinity))

    def affinity_table(self) -> np.ndarray:
        if self.affinity is None:
            # cluster c, group g: ratings alternate high/low so clusters disagree
            c = np.arange(self.user_clusters)[:, None]
            g = np.arange(self.item_groups)[None, :]
            return np.where((c + g) % 2 == 0, 4.0, 1.0)
        table = np.asarray(self.affinity, dtype=np.float64)
        if table.shape != (self.user_clusters, self.item_groups):
            raise ValueError(
                f"affinity table is {table.shape}, expected ({self.user_clusters}, {self.item_groups})"
            )
        if table.min() < MIN_RATING or table.max() > MAX_RATING:
            raise ValueError("affinity entries must lie in [0, 5]")
        return table

    def to_dict(self) -> dict:
        d = asdict(self)
        d["affinity"] = self.affinity_table().tolist()
        return d


@dataclass(frozen=True, eq=False)
class GroundTruth:
    grid: np.ndarray  # users x items noiseless affinity
    user_cluster: np.ndarray
    item_group: np.ndarray

    def to_csv(self, path: str | Path, users, items) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["user_id", "cluster", *items])
            for uid, c, row in zip(users, self.user_cluster, self.grid):
                w.writerow([uid, int(c), *(repr(float(v)) for v in row)])

    def groups_to_csv(self, path: str | Path, items) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["item_id", "group"])
            for it, g in zip(items, self.item_group):
                w.writerow([it, int(g)])


def _balanced(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    labels = np.empty(n, dtype=np.intp)
    labels[rng.permutation(n)] = np.arange(n) % k
    return labels


def user_ids(n: int) -> tuple[str, ...]:
    width = max(4, len(str(n)))
    return tuple(f"u{i:0{width}d}" for i in range(1, n + 1))


def item_ids(n: int) -> tuple[str, ...]:
    width = max(2, len(str(n)))
    return tuple(f"i{j:0{width}d}" for j in range(1, n + 1))


def generate(spec: SynthSpec) -> tuple[RatingsMatrix, GroundTruth]:
    """Draw a matrix: ``clamp(round(affinity + noise), 0, 5)``, then mask cells at ``missing_rate``."""
    table = spec.affinity_table()
    rng = np.random.default_rng(spec.seed)
    uc = _balanced(spec.n_users, spec.user_clusters, rng)
    ig = _balanced(spec.n_items, spec.item_groups, rng)
    truth = table[uc][:, ig]
    noise = rng.normal(0.0, spec.noise_sd, size=truth.shape) if spec.noise_sd > 0 else 0.0
    values = np.clip(np.rint(truth + noise), MIN_RATING, MAX_RATING)
    mask = rng.random(truth.shape) < spec.missing_rate
    values[mask] = np.nan
    m = RatingsMatrix(user_ids(spec.n_users), item_ids(spec.n_items), values)
    return m, GroundTruth(truth, uc, ig)


def synth_catalog(m: RatingsMatrix, truth: GroundTruth | None = None) -> ItemCatalog:
    entries = []
    for j, it in enumerate(m.items):
        label = f"synthetic item {it}"
        if truth is not None:
            label += f" (group {int(truth.item_group[j])})"
        entries.append(CatalogEntry(it, ItemKind.TOOL, label))
    return ItemCatalog(tuple(entries))
