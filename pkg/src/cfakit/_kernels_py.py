"""Pure numpy versions of the compiled kernels.

These are the reference implementations; ``_ckernels.pyx`` must agree with
them bit for bit on the uniforms and to machine precision on the lookups.
"""
import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1


def mix64(z):
    """splitmix64 finalizer on a Python int."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def stream_key(seed, stream):
    """Key for one exogenous stream; a pure function of (seed, stream)."""
    return mix64((seed & _MASK) + (stream + 1) * GOLDEN)


def counter_uniforms(key, start, n):
    """Uniforms in (0, 1) for unit indices ``start .. start + n - 1``.

    Unit ``i`` always receives the same value for a given key, which is what
    makes chunked or threaded sampling reproduce the serial stream.
    """
    idx = np.arange(start + 1, start + n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(key) + idx * np.uint64(GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
        z = z ^ (z >> np.uint64(31))
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def ecdf_lookup(u, cell, offsets, sorted_vals, interp):
    """Quantile lookup of ``u`` inside per-cell sorted target samples.

    Parameters
    ----------
    u : ndarray of float
        Levels in (0, 1).
    cell : ndarray of int
        Target cell per query; values of cell ``c`` live in
        ``sorted_vals[offsets[c]:offsets[c + 1]]``.
    interp : bool
        Linear interpolation between order statistics if True, otherwise the
        left-continuous inverse of the empirical CDF (keeps discrete support).
    """
    lo = offsets[cell]
    m = offsets[cell + 1] - lo
    if interp:
        pos = np.clip(u * m - 0.5, 0.0, np.maximum(m - 1, 0).astype(float))
        k = np.floor(pos).astype(np.int64)
        k1 = np.minimum(k + 1, m - 1)
        frac = pos - k
        return (1 - frac) * sorted_vals[lo + k] + frac * sorted_vals[lo + k1]
    k = np.minimum(np.floor(u * m).astype(np.int64), m - 1)
    return sorted_vals[lo + k]
