"""Run configuration: a YAML file, overridden by command-line flags."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigError
from .evaluation import DEFAULT_K, DEFAULT_THRESHOLD, GridSpec, SplitSpec
from .predict import HybridConfig, alpha_label
from .similarity import DEFAULT_MIN_OVERLAP
from .synth import SynthSpec


@dataclass(frozen=True)
class RunConfig:
    dataset: str | None = None
    catalog: str | None = None
    out: str = "out"
    seed: int = 0
    split: SplitSpec = field(default_factory=SplitSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    k: int = DEFAULT_K
    threshold: float = DEFAULT_THRESHOLD
    max_missing_fraction: float = 0.48
    min_overlap: int = DEFAULT_MIN_OVERLAP
    model: HybridConfig | None = None
    synth: SynthSpec = field(default_factory=SynthSpec)

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if not 0.0 <= self.max_missing_fraction <= 1.0:
            raise ConfigError("max_missing_fraction must be in [0, 1]")
        if self.min_overlap < 2:
            raise ConfigError("min_overlap must be >= 2")
        # one seed drives every random stream of a run
        if self.split.seed != self.seed:
            object.__setattr__(self, "split", replace(self.split, seed=self.seed))
        if self.synth.seed != self.seed:
            object.__setattr__(self, "synth", replace(self.synth, seed=self.seed))

    def to_dict(self) -> dict:
        split = asdict(self.split)
        split.pop("seed")
        synth = self.synth.to_dict()
        synth.pop("seed")
        return {
            "dataset": self.dataset,
            "catalog": self.catalog,
            "out": self.out,
            "seed": self.seed,
            "k": self.k,
            "threshold": self.threshold,
            "max_missing_fraction": self.max_missing_fraction,
            "min_overlap": self.min_overlap,
            "split": split,
            "grid": self.grid.to_dict(),
            "model": self.model.to_dict() if self.model is not None else None,
            "synth": synth,
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_yaml(), encoding="utf-8")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RunConfig":
        d = dict(d or {})
        known = {"dataset", "catalog", "out", "seed", "k", "threshold", "max_missing_fraction",
                 "min_overlap", "split", "grid", "model", "synth"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config key(s): {sorted(extra)}")
        kw: dict[str, Any] = {}
        for key in ("dataset", "catalog", "out"):
            if d.get(key) is not None:
                kw[key] = str(d[key])
        for key, typ in (("seed", int), ("k", int), ("threshold", float),
                         ("max_missing_fraction", float), ("min_overlap", int)):
            if d.get(key) is not None:
                kw[key] = typ(d[key])
        try:
            if d.get("split"):
                s = dict(d["split"])
                s.pop("seed", None)
                kw["split"] = SplitSpec(**s)
            if d.get("grid"):
                g = dict(d["grid"])
                if "neighbors" in g:
                    g["neighbor_counts"] = g.pop("neighbors")
                kw["grid"] = GridSpec(**{k: tuple(v) for k, v in g.items()})
            if d.get("model"):
                kw["model"] = HybridConfig.from_dict(d["model"])
            if d.get("synth"):
                s = dict(d["synth"])
                s.pop("seed", None)
                if s.get("affinity") is not None:
                    s["affinity"] = tuple(tuple(r) for r in s["affinity"])
                kw["synth"] = SynthSpec(**s)
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        return cls(**kw)

    @classmethod
    def load(cls, path: str | Path | None) -> "RunConfig":
        if path is None:
            return cls()
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config not found: {path}")
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if data is not None and not isinstance(data, Mapping):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(data or {})


def describe_model(cfg: HybridConfig) -> str:
    return f"metric={cfg.metric.value} n={cfg.n_neighbors} alpha={alpha_label(cfg.alpha)}"
