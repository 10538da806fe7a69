"""Time the compiled kernels against the numpy fallback on the same inputs.

    python benchmarks/bench_kernels.py [--paths 100000] [--steps 50] [--repeats 3]

Prints one line per kernel with best-of-N wall times, the speedup, and
whether the two backends returned bit-identical arrays.
"""
from __future__ import annotations

import argparse
import math
import time

import numpy as np

from aadmc._kernels import available_backends


def best_of(fn, repeats):
    best, out = math.inf, None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(n_paths, n_steps):
    h = 1.0 / n_steps
    z = available_backends()["numpy"].normals(1, 0, 0, n_paths, n_steps)
    n_outer = max(1, n_paths // 1000)
    spots = np.linspace(30.0, 50.0, n_outer)
    steps = np.full(n_outer, n_steps // 2)
    return {
        "normals": lambda k: k.normals(1, 0, 0, n_paths, n_steps),
        "euler_gbm": lambda k: k.euler_gbm(40.0, 1.0, 0.06 * h, 0.2, math.sqrt(h), 0.0, 0.0, z),
        "inner_terminal": lambda k: k.inner_terminal(1, 2, 0, spots, steps, 1000, 0.06 * h, 0.2, math.sqrt(h),
                                                     -np.inf, np.inf),
    }


def identical(a, b):
    if isinstance(a, tuple):
        return all(identical(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--steps", type=int, default=50)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)
    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; only the numpy fallback is available")
    print(f"{'kernel':<16}{'numpy s':>10}{'cython s':>10}{'speedup':>9}  identical")
    for name, fn in cases(args.paths, args.steps).items():
        t_np, r_np = best_of(lambda: fn(backends["numpy"]), args.repeats)
        if "cython" in backends:
            t_c, r_c = best_of(lambda: fn(backends["cython"]), args.repeats)
            print(f"{name:<16}{t_np:>10.4f}{t_c:>10.4f}{t_np / t_c:>8.1f}x  {identical(r_np, r_c)}")
        else:
            print(f"{name:<16}{t_np:>10.4f}{'-':>10}{'-':>9}  -")


if __name__ == "__main__":
    main()
