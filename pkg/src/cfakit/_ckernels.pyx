# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the sampling and transport kernels."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor

ctypedef unsigned long long u64

cdef u64 GOLDEN = 0x9E3779B97F4A7C15ULL
cdef u64 M1 = 0xBF58476D1CE4E5B9ULL
cdef u64 M2 = 0x94D049BB133111EBULL


cdef inline u64 _mix(u64 z) nogil:
    z = (z ^ (z >> 30)) * M1
    z = (z ^ (z >> 27)) * M2
    return z ^ (z >> 31)


def counter_uniforms(key, long long start, long long n):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef u64 k = <u64>key
    cdef long long i
    cdef double scale = 1.0 / 9007199254740992.0
    with nogil:
        for i in range(n):
            out[i] = (<double>(_mix(k + <u64>(start + i + 1) * GOLDEN) >> 11) + 0.5) * scale
    return out


def ecdf_lookup(double[:] u, long long[:] cell, long long[:] offsets,
                double[:] sorted_vals, bint interp):
    cdef Py_ssize_t n = u.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i
    cdef long long lo, m, k, k1
    cdef double pos, frac
    with nogil:
        for i in range(n):
            lo = offsets[cell[i]]
            m = offsets[cell[i] + 1] - lo
            if interp:
                pos = u[i] * m - 0.5
                if pos < 0:
                    pos = 0
                if pos > m - 1:
                    pos = m - 1
                k = <long long>floor(pos)
                k1 = k + 1
                if k1 > m - 1:
                    k1 = m - 1
                frac = pos - k
                out[i] = (1 - frac) * sorted_vals[lo + k] + frac * sorted_vals[lo + k1]
            else:
                k = <long long>floor(u[i] * m)
                if k > m - 1:
                    k = m - 1
                out[i] = sorted_vals[lo + k]
    return out
