"""Time the compiled kernels against the numpy reference implementations.

Run with ``python3 benchmarks/bench_kernels.py [--n 2000000] [--repeat 5]``.
"""
import argparse
import timeit

import numpy as np

from cfakit import _kernels_py as py
from cfakit import kernels


def _cases(n, rng):
    key = py.stream_key(1, 0)
    sizes = rng.integers(50, 500, size=200)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    vals = np.concatenate([np.sort(rng.normal(size=s)) for s in sizes])
    u = rng.uniform(size=n)
    cell = rng.integers(0, len(sizes), size=n).astype(np.int64)
    return {
        "counter_uniforms": lambda m: m.counter_uniforms(key, 0, n),
        "ecdf_lookup(step)": lambda m: m.ecdf_lookup(u, cell, offsets, vals, False),
        "ecdf_lookup(interp)": lambda m: m.ecdf_lookup(u, cell, offsets, vals, True),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=2_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if kernels._c is None:
        print("compiled kernels unavailable; only the numpy backend can be timed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'numpy [ms]':>12}{'cython [ms]':>13}{'speedup':>9}")
    for name, fn in _cases(args.n, rng).items():
        t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat)) * 1e3
        if kernels._c is None:
            print(f"{name:<22}{t_py:>12.1f}{'-':>13}{'-':>9}")
            continue
        t_c = min(timeit.repeat(lambda: fn(kernels._c), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<22}{t_py:>12.1f}{t_c:>13.1f}{t_py / t_c:>8.1f}x")


if __name__ == "__main__":
    main()
