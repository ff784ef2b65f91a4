"""``hybridcf`` command-line interface.

Subcommands: synth, ingest, split, gridsearch, evaluate, recommend.  Each
accepts ``--config`` (YAML) and flags that override it; the resolved
configuration is written next to the outputs as ``effective_config.yaml``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig, describe_model
from .errors import ConfigError, HybridCFError, IngestError
from .evaluation import GridSpec, evaluate_config, grid_search, split_users
from .predict import HybridConfig, alpha_label, cold_start_profile, parse_alpha, predict_hybrid
from .ratings import DEFAULT_MAPPING, ItemCatalog, RatingsMatrix, filter_items, ingest_csv, read_profile
from .similarity import SimilarityMetric
from .synth import generate, synth_catalog

log = logging.getLogger("hybridcf")


def _csv_list(text: str, conv):
    return [conv(t) for t in text.split(",") if t.strip()]


def _add_common(p: argparse.ArgumentParser, data: bool = True) -> None:
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    if data:
        p.add_argument("--dataset", help="ratings CSV (user_id + item columns)")
        p.add_argument("--catalog", help="catalog CSV (item_id,kind,label)")
        p.add_argument("--max-missing", type=float, dest="max_missing_fraction",
                       help="drop items whose missing fraction exceeds this (default 0.48)")


def _add_model(p: argparse.ArgumentParser, many: bool) -> None:
    if many:
        p.add_argument("--metric", help="comma list restricting the grid metrics")
        p.add_argument("--neighbors", help="comma list restricting the grid neighbor counts")
        p.add_argument("--alpha", help="comma list restricting the grid alphas (e.g. 0,1/4,1)")
    else:
        p.add_argument("--metric", choices=[m.value for m in SimilarityMetric])
        p.add_argument("--neighbors", type=int)
        p.add_argument("--alpha", help="hybrid weight, e.g. 0.25 or 1/4")


def _add_scoring(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, help="cut-off for precision/recall@k (default 5)")
    p.add_argument("--threshold", type=float, help="relevance threshold (default 3)")
    p.add_argument("--train-count", type=int, help="explicit number of training users")
    p.add_argument("--test-count", type=int, help="explicit number of test users")
    p.add_argument("--epochs", type=int, dest="holdout_epochs", help="item hold-out epochs")
    p.add_argument("--folds", type=int, dest="cv_folds", help="cross-validation folds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridcf", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic ratings matrix")
    _add_common(p, data=False)
    p.add_argument("--users", type=int, dest="n_users")
    p.add_argument("--items", type=int, dest="n_items")
    p.add_argument("--clusters", type=int, dest="user_clusters")
    p.add_argument("--groups", type=int, dest="item_groups")
    p.add_argument("--noise", type=float, dest="noise_sd")
    p.add_argument("--missing-rate", type=float, dest="missing_rate")

    p = sub.add_parser("ingest", help="map labels, drop sparse items, write a clean matrix")
    _add_common(p)

    p = sub.add_parser("split", help="seeded train/test user split")
    _add_common(p)
    p.add_argument("--train-count", type=int)
    p.add_argument("--test-count", type=int)
    p.add_argument("--train-fraction", type=float)

    p = sub.add_parser("gridsearch", help="cross-validated metric x neighbors x alpha search")
    _add_common(p)
    _add_model(p, many=True)
    _add_scoring(p)
    p.add_argument("--plot", action="store_true", help="also write PNG charts (needs matplotlib)")

    p = sub.add_parser("evaluate", help="score one configuration on the test users")
    _add_common(p)
    _add_model(p, many=False)
    _add_scoring(p)
    p.add_argument("--model", help="best_config.json from a previous gridsearch")

    p = sub.add_parser("recommend", help="rank unanswered items for a new user's answer sheet")
    _add_common(p)
    _add_model(p, many=False)
    p.add_argument("--profile", required=True, help="answers: CSV item_id,response or JSON object")
    p.add_argument("--model", help="best_config.json from a previous gridsearch")
    p.add_argument("--top-k", type=int, default=5)
    return parser


# --- config resolution ---------------------------------------------------------


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(getattr(args, "config", None))
    top = {}
    for key in ("dataset", "catalog", "out", "seed", "max_missing_fraction", "k", "threshold"):
        v = getattr(args, key, None)
        if v is not None:
            top[key] = v
    split_kw = {}
    for key in ("train_count", "test_count", "train_fraction", "holdout_epochs", "cv_folds"):
        v = getattr(args, key, None)
        if v is not None:
            split_kw[key] = v
    try:
        if split_kw:
            top["split"] = replace(cfg.split, **split_kw)
        if args.command == "synth":
            synth_kw = {k: getattr(args, k) for k in
                        ("n_users", "n_items", "user_clusters", "item_groups", "noise_sd", "missing_rate")
                        if getattr(args, k, None) is not None}
            if synth_kw:
                if ("user_clusters" in synth_kw or "item_groups" in synth_kw) and cfg.synth.affinity is not None:
                    synth_kw["affinity"] = None
                top["synth"] = replace(cfg.synth, **synth_kw)
        elif args.command == "gridsearch":
            g = cfg.grid
            if args.metric:
                g = replace(g, metrics=tuple(_csv_list(args.metric, SimilarityMetric)))
            if args.neighbors:
                g = replace(g, neighbor_counts=tuple(_csv_list(args.neighbors, int)))
            if args.alpha:
                g = replace(g, alphas=tuple(_csv_list(args.alpha, parse_alpha)))
            top["grid"] = GridSpec(g.metrics, g.neighbor_counts, g.alphas)
        elif args.command in ("evaluate", "recommend"):
            model = cfg.model
            if getattr(args, "model", None):
                path = Path(args.model)
                if not path.exists():
                    raise ConfigError(f"model file not found: {path}")
                model = HybridConfig.from_dict(json.loads(path.read_text(encoding="utf-8")))
            if args.metric or args.neighbors is not None or args.alpha is not None:
                if model is None and not (args.metric and args.neighbors is not None and args.alpha is not None):
                    raise ConfigError("give --metric, --neighbors and --alpha (or a --model file)")
                base = model or HybridConfig(args.metric, args.neighbors, args.alpha)
                model = HybridConfig(
                    args.metric or base.metric,
                    args.neighbors if args.neighbors is not None else base.n_neighbors,
                    args.alpha if args.alpha is not None else base.alpha,
                )
            if model is None:
                raise ConfigError("no model: pass --model best_config.json or --metric/--neighbors/--alpha")
            top["model"] = model
        d = cfg.__dict__ | top
        return RunConfig(**d)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, HybridCFError):
            raise
        raise ConfigError(str(exc)) from exc


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(cfg: RunConfig) -> tuple[RatingsMatrix, ItemCatalog | None, list[str]]:
    if not cfg.dataset:
        raise ConfigError("no dataset given (--dataset or 'dataset:' in the config)")
    catalog = ItemCatalog.from_csv(cfg.catalog) if cfg.catalog else None
    m = ingest_csv(cfg.dataset, DEFAULT_MAPPING, catalog)
    m, removed = filter_items(m, cfg.max_missing_fraction)
    if removed:
        log.info("removed sparse item(s): %s", ", ".join(removed))
    empty = m.empty_users()
    if empty:
        log.info("%d user(s) without ratings kept; they are served by fallback means", len(empty))
    return m, catalog, removed


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


# --- commands ------------------------------------------------------------------


def cmd_synth(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    m, truth = generate(cfg.synth)
    m.to_csv(out / "ratings.csv")
    truth.to_csv(out / "ground_truth.csv", m.users, m.items)
    truth.groups_to_csv(out / "item_groups.csv", m.items)
    synth_catalog(m, truth).to_csv(out / "catalog.csv")
    cfg.write(out / "effective_config.yaml")
    print(f"wrote {m.shape[0]}x{m.shape[1]} matrix to {out / 'ratings.csv'}")
    return 0


def cmd_ingest(cfg: RunConfig) -> int:
    m, _, removed = _load(cfg)
    out = _out_dir(cfg)
    m.to_csv(out / "ratings_clean.csv")
    _dump_json(out / "ingest.json", {
        "users": m.shape[0],
        "items": list(m.items),
        "removed_items": removed,
        "users_without_ratings": list(m.empty_users()),
        "fingerprint": m.fingerprint(),
    })
    cfg.write(out / "effective_config.yaml")
    print(f"{m.shape[0]} users x {m.shape[1]} items; removed: {', '.join(removed) or 'none'}")
    return 0


def cmd_split(cfg: RunConfig) -> int:
    m, _, _ = _load(cfg)
    out = _out_dir(cfg)
    train, test = split_users(m, cfg.split)
    train.to_csv(out / "train.csv")
    test.to_csv(out / "test.csv")
    _dump_json(out / "split.json", {
        "train_users": train.shape[0],
        "test_users": test.shape[0],
        "seed": cfg.seed,
        "train": list(train.users),
        "test": list(test.users),
    })
    cfg.write(out / "effective_config.yaml")
    print(f"train {train.shape[0]} users, test {test.shape[0]} users")
    return 0


def _plot(report, out: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    wa = report.weights_analysis()
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar([alpha_label(r.config.alpha) for r in wa], [r.mae for r in wa], color="tab:blue")
    ax.set_xlabel("alpha (user-based weight)")
    ax.set_ylabel("best CV MAE")
    fig.tight_layout()
    fig.savefig(out / "best_mae_per_alpha.png", metadata={"Software": None})
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 4))
    rows = report.metric_comparison()
    for metric in dict.fromkeys(r.config.metric for r in rows):
        sel = [r for r in rows if r.config.metric == metric]
        ax.plot([alpha_label(r.config.alpha) for r in sel], [r.mae for r in sel], marker="o", label=metric.title)
    ax.set_xlabel("alpha (user-based weight)")
    ax.set_ylabel("best CV MAE over n")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "metric_comparison.png", metadata={"Software": None})
    plt.close(fig)


def cmd_gridsearch(cfg: RunConfig, plot: bool = False) -> int:
    m, _, removed = _load(cfg)
    out = _out_dir(cfg)
    report = grid_search(m, cfg.split, cfg.grid, cfg.k, cfg.threshold, cfg.min_overlap)
    report.metadata["removed_items"] = removed
    report.metadata["config"] = cfg.to_dict()
    report.write_csv(out / "grid_report.csv")
    report.write_json(out / "grid_report.json")
    report.write_weights_analysis(out / "weights_analysis.csv")
    report.write_metric_comparison(out / "metric_comparison.csv")
    _dump_json(out / "best_config.json", report.best.to_dict())
    cfg.write(out / "effective_config.yaml")
    if plot:
        _plot(report, out)
    row = report.best_row
    print(report.format_table())
    print(
        f"best: {row.config.metric.value} n={row.config.n_neighbors} "
        f"alpha={alpha_label(row.config.alpha)} cv_mae={row.mae:.4f}"
    )
    if report.test is not None:
        t = report.test
        print(
            f"test: mae={t.mae:.4f} rel_err={_pct(t.relative_error)} "
            f"precision@{cfg.k}={_num(t.precision_at_k)} recall@{cfg.k}={_num(t.recall_at_k)} "
            f"(global-mean baseline mae={t.baseline_mae:.4f})"
        )
    return 0


def _pct(v):
    return "n/a" if v is None else f"{100 * v:.2f}%"


def _num(v):
    return "n/a" if v is None else f"{v:.4f}"


def cmd_evaluate(cfg: RunConfig) -> int:
    m, _, _ = _load(cfg)
    out = _out_dir(cfg)
    train, test = split_users(m, cfg.split)
    res = evaluate_config(train, test, cfg.model, cfg.split, cfg.k, cfg.threshold, cfg.min_overlap)
    payload = res.to_dict()
    payload["k"] = cfg.k
    payload["relevance_threshold"] = cfg.threshold
    payload["metadata"] = {"config": cfg.to_dict(), "fingerprint": m.fingerprint(),
                           "train_users": train.shape[0], "test_users": test.shape[0]}
    _dump_json(out / "evaluation.json", payload)
    with (out / "evaluation.csv").open("w", encoding="utf-8") as fh:
        fh.write("metric,n,alpha,mae,rel_err,precision_at_k,recall_at_k\n")
        vals = [res.mae, res.relative_error, res.precision_at_k, res.recall_at_k]
        fh.write(",".join([cfg.model.metric.value, str(cfg.model.n_neighbors), alpha_label(cfg.model.alpha)]
                          + ["" if v is None else repr(float(v)) for v in vals]) + "\n")
    cfg.write(out / "effective_config.yaml")
    print(f"{describe_model(cfg.model)}: mae={res.mae:.4f} rel_err={_pct(res.relative_error)} "
          f"precision@{cfg.k}={_num(res.precision_at_k)} recall@{cfg.k}={_num(res.recall_at_k)}")
    return 0


def cmd_recommend(cfg: RunConfig, profile_path: str, top_k: int) -> int:
    if top_k < 1:
        raise ConfigError("--top-k must be >= 1")
    m, catalog, _ = _load(cfg)
    out = _out_dir(cfg)
    answers = read_profile(profile_path)
    vec = cold_start_profile(answers, DEFAULT_MAPPING, m.items, catalog)
    unanswered = [it for it, v in zip(m.items, vec) if np.isnan(v)]
    payload = {"model": cfg.model.to_dict(), "profile": str(profile_path), "recommendations": []}
    if not unanswered:
        print("nothing to predict: the profile rates every item")
    elif np.isnan(vec).all():
        log.info("profile has no ratings; predictions come from fallback means")
    if unanswered:
        recs = predict_hybrid(vec, m, unanswered, cfg.model, min_overlap=cfg.min_overlap).top(top_k)
        for rank, r in enumerate(recs, 1):
            label = catalog.label(r.item_id) if catalog is not None else r.item_id
            payload["recommendations"].append({
                "rank": rank, "item_id": r.item_id, "label": label,
                "predicted_rating": r.predicted_rating, "source": r.source.value,
            })
            print(f"{rank:>2}. {r.item_id:<6} {r.predicted_rating:5.2f}  {label}")
    _dump_json(out / "recommendations.json", payload)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        if args.command == "synth":
            return cmd_synth(cfg)
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "split":
            return cmd_split(cfg)
        if args.command == "gridsearch":
            return cmd_gridsearch(cfg, plot=args.plot)
        if args.command == "evaluate":
            return cmd_evaluate(cfg)
        return cmd_recommend(cfg, args.profile, args.top_k)
    except (HybridCFError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"hybridcf {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
