"""Backend selection for the scoring kernels.

The compiled extension is used when it imports; set ``HYBRIDCF_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

from . import _kernels_py

if os.environ.get("HYBRIDCF_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND: str = _impl.BACKEND
pearson_scores = _impl.pearson_scores
euclidean_scores = _impl.euclidean_scores
cosine_scores = _impl.cosine_scores


def backends() -> dict:
    """All importable backends by name, for benchmarks and parity tests."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]

        found["cython"] = _kernels
    except ImportError:
        pass
    return found
