import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import as_matrix
from hybridcf import generate, ingest_csv
from hybridcf.config import RunConfig
from hybridcf.cli import main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "synth"
    assert run("synth", "--out", out, "--users", 60, "--items", 12, "--seed", 3) == 0
    return out


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_synth_then_ingest_roundtrip(synth_dir, tmp_path):
    for name in ("ratings.csv", "ground_truth.csv", "item_groups.csv", "catalog.csv", "effective_config.yaml"):
        assert (synth_dir / name).exists()
    cfg = RunConfig.load(synth_dir / "effective_config.yaml")
    expected, _ = generate(cfg.synth)
    out = tmp_path / "ingest"
    assert run("ingest", "--dataset", synth_dir / "ratings.csv", "--catalog", synth_dir / "catalog.csv",
               "--out", out) == 0
    assert ingest_csv(out / "ratings_clean.csv") == expected
    meta = json.loads((out / "ingest.json").read_text())
    assert meta["removed_items"] == [] and meta["fingerprint"] == expected.fingerprint()


def test_ingest_drops_sparse_item(tmp_path):
    v = np.full((10, 3), 4.0)
    v[:6, 2] = np.nan
    as_matrix(v).to_csv(tmp_path / "m.csv")
    assert run("ingest", "--dataset", tmp_path / "m.csv", "--out", tmp_path / "o") == 0
    assert json.loads((tmp_path / "o" / "ingest.json").read_text())["removed_items"] == ["i2"]


def test_split_with_count_override(tmp_path):
    d = tmp_path / "big"
    assert run("synth", "--out", d, "--users", 1237, "--items", 5) == 0
    out = tmp_path / "split"
    assert run("split", "--dataset", d / "ratings.csv", "--out", out, "--train-count", 947, "--test-count", 290) == 0
    assert len(read_rows(out / "train.csv")) == 947
    assert len(read_rows(out / "test.csv")) == 290
    meta = json.loads((out / "split.json").read_text())
    assert not set(meta["train"]) & set(meta["test"])


def test_gridsearch_default_grid(synth_dir, tmp_path, capsys):
    out = tmp_path / "grid"
    assert run("gridsearch", "--dataset", synth_dir / "ratings.csv", "--out", out,
               "--folds", 3, "--epochs", 1) == 0
    rows = read_rows(out / "grid_report.csv")
    assert len(rows) == 120
    assert {r["metric"] for r in rows} == {"euclidean", "cosine", "pearson"}
    assert {r["n"] for r in rows} == {"3", "5", "7", "11"}
    assert len({r["alpha"] for r in rows}) == 10
    best = json.loads((out / "best_config.json").read_text())
    assert float(min(rows, key=lambda r: float(r["mae"]))["mae"]) == min(float(r["mae"]) for r in rows)
    assert best["metric"] in ("euclidean", "cosine", "pearson")
    printed = capsys.readouterr().out
    assert "best:" in printed and "test: mae=" in printed
    for name in ("grid_report.json", "weights_analysis.csv", "metric_comparison.csv", "effective_config.yaml"):
        assert (out / name).exists()


def test_gridsearch_singleton(synth_dir, tmp_path):
    out = tmp_path / "one"
    assert run("gridsearch", "--dataset", synth_dir / "ratings.csv", "--out", out, "--metric", "euclidean",
               "--neighbors", 7, "--alpha", 1, "--folds", 3, "--epochs", 1) == 0
    rows = read_rows(out / "grid_report.csv")
    assert len(rows) == 1 and rows[0]["alpha"] == "1"


def test_gridsearch_config_rerun_is_identical(synth_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("gridsearch", "--dataset", synth_dir / "ratings.csv", "--out", a, "--metric", "cosine,pearson",
               "--neighbors", "3,5", "--alpha", "0,1/4,1", "--folds", 3, "--epochs", 2, "--seed", 8) == 0
    assert run("gridsearch", "--config", a / "effective_config.yaml", "--out", b) == 0
    for name in ("grid_report.csv", "best_config.json", "weights_analysis.csv", "metric_comparison.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_gridsearch_plot(synth_dir, tmp_path):
    pytest.importorskip("matplotlib")
    out = tmp_path / "plot"
    assert run("gridsearch", "--dataset", synth_dir / "ratings.csv", "--out", out, "--metric", "pearson",
               "--neighbors", 3, "--alpha", "0,1/2,1", "--folds", 3, "--epochs", 1, "--plot") == 0
    assert (out / "best_mae_per_alpha.png").stat().st_size > 0
    assert (out / "metric_comparison.png").stat().st_size > 0


def test_missing_dataset(tmp_path, capsys):
    assert run("gridsearch", "--dataset", tmp_path / "nope.csv", "--out", tmp_path / "x") != 0
    assert "dataset not found" in capsys.readouterr().err


def test_evaluate_perfect_fixture(tmp_path):
    row = [1, 2, 3, 4, 5, 0, 2, 4, 1, 3]
    as_matrix(np.tile(row, (20, 1)).astype(float)).to_csv(tmp_path / "m.csv")
    out = tmp_path / "ev"
    assert run("evaluate", "--dataset", tmp_path / "m.csv", "--out", out, "--metric", "euclidean",
               "--neighbors", 3, "--alpha", 1) == 0
    doc = json.loads((out / "evaluation.json").read_text())
    assert doc["mae"] == 0.0
    assert read_rows(out / "evaluation.csv")[0]["mae"] == "0.0"


def test_evaluate_with_model_file(synth_dir, tmp_path):
    model = tmp_path / "best.json"
    model.write_text(json.dumps({"metric": "pearson", "n_neighbors": 5, "alpha": 0.25}))
    assert run("evaluate", "--dataset", synth_dir / "ratings.csv", "--out", tmp_path / "ev", "--model", model) == 0
    doc = json.loads((tmp_path / "ev" / "evaluation.json").read_text())
    assert doc["config"]["alpha_label"] == "1/4"
    assert 0 <= doc["mae"] <= 5


def _profile(path, answers):
    path.write_text(json.dumps(answers), encoding="utf-8")
    return path


def test_recommend_identical_profile(tmp_path, capsys):
    rng = np.random.default_rng(0)
    v = rng.integers(0, 6, size=(6, 6)).astype(float)
    v[0] = [2, 4, 1, 3, 5, 0]
    as_matrix(v).to_csv(tmp_path / "m.csv")
    prof = _profile(tmp_path / "p.json", {"i0": "2", "i1": "much", "i2": "very little"})
    out = tmp_path / "rec"
    assert run("recommend", "--dataset", tmp_path / "m.csv", "--out", out, "--profile", prof,
               "--metric", "euclidean", "--neighbors", 1, "--alpha", 1, "--top-k", 3) == 0
    recs = json.loads((out / "recommendations.json").read_text())["recommendations"]
    assert [r["item_id"] for r in recs] == ["i4", "i3", "i5"]
    assert [r["predicted_rating"] for r in recs] == [5.0, 3.0, 0.0]
    assert " 1. i4" in capsys.readouterr().out


def test_recommend_all_known_profile(tmp_path, capsys):
    as_matrix([[1, 2], [3, 4], [5, 0]]).to_csv(tmp_path / "m.csv")
    prof = _profile(tmp_path / "p.json", {"i0": "medium", "i1": "little"})
    assert run("recommend", "--dataset", tmp_path / "m.csv", "--out", tmp_path / "r", "--profile", prof,
               "--metric", "cosine", "--neighbors", 1, "--alpha", "1/2") == 0
    assert "nothing to predict" in capsys.readouterr().out
    assert json.loads((tmp_path / "r" / "recommendations.json").read_text())["recommendations"] == []


def test_recommend_unknown_item(tmp_path, capsys):
    as_matrix([[1, 2], [3, 4]]).to_csv(tmp_path / "m.csv")
    prof = _profile(tmp_path / "p.json", {"zz": "medium"})
    assert run("recommend", "--dataset", tmp_path / "m.csv", "--out", tmp_path / "r", "--profile", prof,
               "--metric", "cosine", "--neighbors", 1, "--alpha", 1) != 0
    assert "unknown item" in capsys.readouterr().err


def test_recommend_cluster_member(tmp_path):
    d = tmp_path / "s"
    cfg = tmp_path / "synth.yaml"
    cfg.write_text("seed: 4\nsynth:\n  n_users: 80\n  n_items: 16\n  user_clusters: 2\n  item_groups: 2\n"
                   "  affinity: [[5, 1], [1, 5]]\n  noise_sd: 0.5\n  missing_rate: 0.0\n")
    assert run("synth", "--config", cfg, "--out", d) == 0
    m, truth = generate(RunConfig.load(cfg).synth)
    member = int(np.flatnonzero(np.asarray(truth.user_cluster) == 0)[0])
    answered = list(range(0, 16, 2))
    answers = {m.items[j]: str(int(m.values[member, j])) for j in answered}
    prof = _profile(tmp_path / "p.json", answers)
    out = tmp_path / "rec"
    assert run("recommend", "--dataset", d / "ratings.csv", "--catalog", d / "catalog.csv", "--out", out,
               "--profile", prof, "--metric", "pearson", "--neighbors", 7, "--alpha", "1/3", "--top-k", 3) == 0
    recs = json.loads((out / "recommendations.json").read_text())["recommendations"]
    assert len(recs) == 3
    favored = int(np.argmax([5, 1]))
    assert all(truth.item_group[m.items.index(r["item_id"])] == favored for r in recs)


def test_bad_model_flags(tmp_path, capsys):
    as_matrix([[1, 2], [3, 4]]).to_csv(tmp_path / "m.csv")
    assert run("evaluate", "--dataset", tmp_path / "m.csv", "--out", tmp_path / "e", "--metric", "cosine") != 0
    assert "error" in capsys.readouterr().err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "hybridcf", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("synth", "ingest", "split", "gridsearch", "evaluate", "recommend"):
        assert cmd in res.stdout
