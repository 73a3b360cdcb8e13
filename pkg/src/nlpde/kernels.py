"""Backend selection for the hot reflection kernels.

The compiled extension is used when it imports; otherwise the NumPy
fallback.  Setting ``NLPDE_PURE_PYTHON=1`` forces the fallback.
"""
import os

import numpy as np

from ._ext import _reflect_py as python_backend

try:
    if os.environ.get("NLPDE_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python backend requested")
    from ._ext import _reflect as compiled_backend
except ImportError:
    compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"


def reflect_batch(a, b, lower, upper, max_bounces):
    return backend.reflect_batch(
        np.ascontiguousarray(a, dtype=np.float64),
        np.ascontiguousarray(b, dtype=np.float64),
        np.ascontiguousarray(lower, dtype=np.float64),
        np.ascontiguousarray(upper, dtype=np.float64),
        int(max_bounces),
    )


def fold_batch(b, lower, upper):
    return backend.fold_batch(
        np.ascontiguousarray(b, dtype=np.float64),
        np.ascontiguousarray(lower, dtype=np.float64),
        np.ascontiguousarray(upper, dtype=np.float64),
    )
