"""Kernel dispatch: compiled extension when available, numpy otherwise.

Set ``CFAKIT_PURE=1`` in the environment to force the numpy fallback.
"""
import os

import numpy as np

from . import _kernels_py as _py

try:
    if os.environ.get("CFAKIT_PURE") == "1":
        raise ImportError("pure mode requested")
    from . import _ckernels as _c
    BACKEND = "cython"
except ImportError:
    _c = None
    BACKEND = "numpy"

stream_key = _py.stream_key


def counter_uniforms(key, start, n):
    if n == 0:
        return np.empty(0)
    if _c is not None:
        return _c.counter_uniforms(key, int(start), int(n))
    return _py.counter_uniforms(key, start, n)


def ecdf_lookup(u, cell, offsets, sorted_vals, interp):
    u = np.ascontiguousarray(u, dtype=np.float64)
    cell = np.ascontiguousarray(cell, dtype=np.int64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    sorted_vals = np.ascontiguousarray(sorted_vals, dtype=np.float64)
    if len(u) == 0:
        return np.empty(0)
    if _c is not None:
        return _c.ecdf_lookup(u, cell, offsets, sorted_vals, bool(interp))
    return _py.ecdf_lookup(u, cell, offsets, sorted_vals, interp)
