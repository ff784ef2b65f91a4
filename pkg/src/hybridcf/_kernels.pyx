# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled scoring kernels: one query vector against selected rows of a frame."""

import numpy as np

from libc.math cimport sqrt, fabs, copysign, isnan, NAN

BACKEND = "cython"

cdef double VAR_EPS = 1e-12


cdef inline double _pearson_from_sums(double n, double sx, double sy, double sxx,
                                      double syy, double sxy, double min_overlap) nogil:
    cdef double num, dx, dy, key, r
    if n < min_overlap:
        return NAN
    num = n * sxy - sx * sy
    dx = n * sxx - sx * sx
    dy = n * syy - sy * sy
    if dx <= VAR_EPS * n * sxx or dy <= VAR_EPS * n * syy:
        return NAN
    # squared coefficient as one correctly rounded quotient: exact for integer ratings
    key = num * fabs(num) / (dx * dy)
    r = copysign(sqrt(fabs(key)), key)
    if r > 1.0:
        r = 1.0
    elif r < -1.0:
        r = -1.0
    return r + 0.0


def pearson_scores(const double[:, ::1] X, const double[::1] q,
                   const Py_ssize_t[::1] rows, Py_ssize_t min_overlap):
    """Pairwise-complete Pearson of ``q`` against ``X[rows]``; ``nan`` where undefined."""
    cdef Py_ssize_t nr = rows.shape[0], d = X.shape[1], r, i, j
    cdef double x, y, n, sx, sy, sxx, syy, sxy
    out = np.empty(nr, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for r in range(nr):
            i = rows[r]
            n = 0.0; sx = 0.0; sy = 0.0; sxx = 0.0; syy = 0.0; sxy = 0.0
            for j in range(d):
                x = X[i, j]
                y = q[j]
                if isnan(x) or isnan(y):
                    continue
                n += 1.0
                sx += x
                sy += y
                sxx += x * x
                syy += y * y
                sxy += x * y
            o[r] = _pearson_from_sums(n, sx, sy, sxx, syy, sxy, <double>min_overlap)
    return out


def euclidean_scores(const double[:, ::1] D, const double[::1] q, const Py_ssize_t[::1] rows):
    cdef Py_ssize_t nr = rows.shape[0], d = D.shape[1], r, i, j
    cdef double acc, diff
    out = np.empty(nr, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for r in range(nr):
            i = rows[r]
            acc = 0.0
            for j in range(d):
                diff = D[i, j] - q[j]
                acc += diff * diff
            o[r] = sqrt(acc)
    return out


def cosine_scores(const double[:, ::1] D, const double[::1] q, const Py_ssize_t[::1] rows):
    """``1 - cos`` of ``q`` against ``D[rows]``; ``nan`` when either vector has zero norm."""
    cdef Py_ssize_t nr = rows.shape[0], d = D.shape[1], r, i, j
    cdef double dot, nx, ny, c
    out = np.empty(nr, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for r in range(nr):
            i = rows[r]
            dot = 0.0; nx = 0.0; ny = 0.0
            for j in range(d):
                dot += D[i, j] * q[j]
                nx += D[i, j] * D[i, j]
                ny += q[j] * q[j]
            if nx == 0.0 or ny == 0.0:
                o[r] = NAN
                continue
            c = 1.0 - dot / sqrt(nx * ny)
            if c < 0.0:
                c = 0.0
            elif c > 2.0:
                c = 2.0
            o[r] = c
    return out
