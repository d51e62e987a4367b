#!/usr/bin/env python3
"""Benchmark the two kernel backends against each other.

Times the population report-emission kernel and the divergence m-scan under
both the numba and numpy implementations on identical inputs, and verifies
they agree while at it. Run:

    python3 benchmarks/bench_backends.py            # full sizes
    python3 benchmarks/bench_backends.py --quick    # smoke sizes
"""

import argparse
import time

import numpy as np

from ldpshuffle.client import level_count
from ldpshuffle.core import rr_probability
from ldpshuffle.kernels import HAVE_NUMBA, divergence_scan, emit_reports, warm_up
from ldpshuffle.randomizer import RandomnessStream


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_emit(n, d, repeats):
    rng = RandomnessStream(99, 0)
    levels = rng.integers(1, level_count(d) + 1, size=n).astype(np.int64)
    sig_t = rng.integers(0, d + 1, size=n).astype(np.int64)
    sig_v = np.where(sig_t > 0, np.where(rng.uniform(size=n) < 0.5, 1, -1), 0).astype(np.int64)
    coins = rng.uniform(size=(n, d))
    p = rr_probability(1.0)

    rows = []
    outputs = {}
    for backend in ("numba", "numpy") if HAVE_NUMBA else ("numpy",):
        elapsed, out = _time(
            lambda b=backend: emit_reports(sig_t, sig_v, levels, coins, p, d, backend=b),
            repeats)
        outputs[backend] = out
        rows.append((f"emit_reports n={n} d={d}", backend, elapsed))
    if len(outputs) == 2:
        assert all(np.array_equal(a, b)
                   for a, b in zip(outputs["numba"], outputs["numpy"]))
    return rows


def bench_scan(n, eps0, eps, repeats):
    rows = []
    outputs = {}
    for backend in ("numba", "numpy") if HAVE_NUMBA else ("numpy",):
        elapsed, out = _time(
            lambda b=backend: divergence_scan(n, eps0, eps, backend=b), repeats)
        outputs[backend] = out
        rows.append((f"divergence_scan n={n}", backend, elapsed))
    if len(outputs) == 2:
        scale = np.maximum(np.maximum(outputs["numba"], outputs["numpy"]), 1e-30)
        assert float(np.max(np.abs(outputs["numba"] - outputs["numpy"]) / scale)) < 1e-9
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="small sizes, one repeat")
    args = parser.parse_args()

    if not HAVE_NUMBA:
        print("numba not installed; timing the numpy path only")
    else:
        warm_up()

    repeats = 1 if args.quick else 3
    emit_cases = [(20_000, 64)] if args.quick else [(100_000, 64), (400_000, 16)]
    scan_cases = [(500, 0.25, 0.02)] if args.quick else [(2000, 0.25, 0.02),
                                                         (5000, 0.25, 0.02)]

    rows = []
    for n, d in emit_cases:
        rows.extend(bench_emit(n, d, repeats))
    for n, eps0, eps in scan_cases:
        rows.extend(bench_scan(n, eps0, eps, repeats))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  backend  best time")
    for name, backend, elapsed in rows:
        print(f"{name:<{width}}  {backend:<7}  {elapsed * 1e3:10.2f} ms")


if __name__ == "__main__":
    main()
