"""Backend selection for the hot per-integration-point kernels.

Two interchangeable implementations exist: numba-compiled loops and a
vectorized pure-numpy fallback.  Setting the environment variable
``PHASEFRAC_PURE_NUMPY=1`` before import forces the fallback; otherwise
numba is used whenever it imports cleanly.  ``benchmarks/bench_kernels.py``
times both paths against each other.
"""

import os

_FORCE_NUMPY = os.environ.get("PHASEFRAC_PURE_NUMPY", "0").strip() not in ("", "0")

try:
    import numba  # noqa: F401

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and not _FORCE_NUMPY


def backend_name() -> str:
    """Name of the kernel backend selected at import time."""
    return "numba" if USE_NUMBA else "numpy"
