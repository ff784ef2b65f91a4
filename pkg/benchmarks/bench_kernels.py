"""Compare the compiled and numpy similarity kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--users 1000] [--items 38] [--repeat 5] [--grid]

The kernel section scores every user against every other one with each backend.
``--grid`` additionally times a full default grid search on a 500x38 synthetic
matrix once per backend (the backend is picked at import, so each run is a
separate interpreter).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from hybridcf import kernels
from hybridcf.ratings import impute_rows

GRID_SNIPPET = """
import time
from hybridcf import BACKEND, GridSpec, SplitSpec, SynthSpec, generate, grid_search
m, _ = generate(SynthSpec(n_users=500, n_items=38, user_clusters=6, item_groups=3, seed=1))
t0 = time.perf_counter()
grid_search(m, SplitSpec(seed=1), GridSpec(), evaluate_test=False)
print(f"{BACKEND} {time.perf_counter() - t0:.2f}")
"""


def kernel_table(n_users: int, n_items: int, repeat: int) -> None:
    rng = np.random.default_rng(0)
    X = rng.integers(0, 6, size=(n_users, n_items)).astype(float)
    X[rng.random(X.shape) < 0.2] = np.nan
    D = np.ascontiguousarray(impute_rows(X))
    rows = np.arange(n_users, dtype=np.intp)
    queries = range(0, n_users, max(1, n_users // 100))

    print(f"{n_users}x{n_items} frame, {len(queries)} queries against all rows, best of {repeat}")
    print(f"{'kernel':<10} " + " ".join(f"{name:>12}" for name in kernels.backends()))
    for kname in ("pearson", "euclidean", "cosine"):
        cells = []
        for mod in kernels.backends().values():
            if kname == "pearson":
                fn = lambda: [mod.pearson_scores(X, X[q], rows, 2) for q in queries]  # noqa: E731
            else:
                f = getattr(mod, f"{kname}_scores")
                fn = lambda f=f: [f(D, D[q], rows) for q in queries]  # noqa: E731
            best = min(timeit.repeat(fn, number=1, repeat=repeat))
            cells.append(f"{1e3 * best:10.2f}ms")
        print(f"{kname:<10} " + " ".join(cells))


def grid_table() -> None:
    print("\nfull 120-cell grid search, 500x38, 10 folds x 5 epochs")
    for pure in ("0", "1"):
        env = dict(os.environ, HYBRIDCF_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", GRID_SNIPPET], env=env, capture_output=True, text=True, check=True)
        name, secs = out.stdout.split()
        print(f"{name:<10} {float(secs):8.2f}s")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--users", type=int, default=1000)
    ap.add_argument("--items", type=int, default=38)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--grid", action="store_true")
    args = ap.parse_args()
    print(f"active backend: {kernels.BACKEND}")
    kernel_table(args.users, args.items, args.repeat)
    if args.grid:
        grid_table()


if __name__ == "__main__":
    main()
