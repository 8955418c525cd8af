"""Timing comparison of the compiled and pure-numpy kernel backends.

Runs the hot kernels and a full stage solve at several resolutions and
prints per-call times side by side.  Usage:

    python3 benchmarks/bench_backends.py [repeats]
"""
import sys
import time

import numpy as np

from mflow._backend import select_backend
from mflow.wasserstein import Wasserstein1D, initial_quantile


def time_call(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(backends, sizes, repeats):
    print("kernel timings (best of %d, microseconds per call)" % repeats)
    header = "%-18s %6s" % ("kernel", "M_q")
    for name in backends:
        header += " %12s" % name
    print(header)
    for M in sizes:
        X = np.asarray(initial_quantile(M).values)
        comb = 2.0 * X
        rows = {
            "cell_slopes": lambda k: k.cell_slopes(X),
            "energy_value": lambda k: k.energy_value(X, 2),
            "energy_gradient": lambda k: k.energy_gradient(X, 2),
            "stage_gradient": lambda k: k.stage_gradient(X, 2, comb, 2.0),
        }
        for label, call in rows.items():
            line = "%-18s %6d" % (label, M)
            for name in backends:
                kern = backends[name]
                t = time_call(lambda: call(kern), repeats)
                line += " %12.2f" % (t * 1e6)
            print(line)
        # pav needs a fresh non-monotone input every call; time it separately
        rng = np.random.default_rng(0)
        raw = np.sort(rng.standard_normal(M)) + 0.05 * rng.standard_normal(M)
        line = "%-18s %6d" % ("pav_inplace", M)
        for name in backends:
            kern = backends[name]
            t = time_call(lambda: kern.pav_inplace(raw.copy()), repeats)
            line += " %12.2f" % (t * 1e6)
        print(line)


def bench_stage_solve(backends, sizes, repeats):
    print()
    print("full stage solve (milliseconds per solve)")
    print("%-10s" % "M_q" + "".join(" %12s" % n for n in backends))
    for M in sizes:
        X0 = initial_quantile(M)
        coeffs = [(4.0, X0.values), (-1.0, X0.values), (5.0, X0.values)]
        line = "%-10d" % M
        for name in backends:
            space = Wasserstein1D("cubic_potential", kernels=backends[name])
            t = time_call(lambda: space.stage_solve(coeffs, 1.0 / 256, X0),
                          repeats)
            line += " %12.3f" % (t * 1e3)
        print(line)


def main():
    repeats = int(sys.argv[1]) if len(sys.argv) > 1 else 5
    backends = {"numpy": select_backend("numpy")[0]}
    try:
        backends["cython"] = select_backend("cython")[0]
    except RuntimeError:
        print("compiled extension not available; timing numpy only")
    bench_kernels(backends, (256, 1024, 4096), repeats)
    bench_stage_solve(backends, (256, 1024), repeats)


if __name__ == "__main__":
    main()
