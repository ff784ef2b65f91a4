"""Pure numpy twin of ``_kernels.pyx``, used when the extension is not built."""

import numpy as np

BACKEND = "python"

VAR_EPS = 1e-12


def _pearson_from_sums(n, sx, sy, sxx, syy, sxy, min_overlap):
    num = n * sxy - sx * sy
    dx = n * sxx - sx * sx
    dy = n * syy - sy * sy
    ok = (n >= min_overlap) & (dx > VAR_EPS * n * sxx) & (dy > VAR_EPS * n * syy)
    with np.errstate(divide="ignore", invalid="ignore"):
        key = num * np.abs(num) / (dx * dy)
    r = np.clip(np.copysign(np.sqrt(np.abs(key)), key), -1.0, 1.0) + 0.0
    return np.where(ok, r, np.nan)


def pearson_scores(X, q, rows, min_overlap):
    X = X[rows]
    mask = ~np.isnan(X) & ~np.isnan(q)
    x = np.where(mask, X, 0.0)
    y = np.where(mask, q, 0.0)
    n = mask.sum(axis=1).astype(np.float64)
    return _pearson_from_sums(
        n,
        x.sum(axis=1),
        y.sum(axis=1),
        (x * x).sum(axis=1),
        (y * y).sum(axis=1),
        (x * y).sum(axis=1),
        min_overlap,
    )


def euclidean_scores(D, q, rows):
    diff = D[rows] - q
    return np.sqrt((diff * diff).sum(axis=1))


def cosine_scores(D, q, rows):
    X = D[rows]
    dot = (X * q).sum(axis=1)
    nx = (X * X).sum(axis=1)
    ny = float((q * q).sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        c = 1.0 - dot / np.sqrt(nx * ny)
    return np.where((nx == 0.0) | (ny == 0.0), np.nan, np.clip(c, 0.0, 2.0))
