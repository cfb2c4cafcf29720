"""Compiled kernels against the numpy/scipy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Both backends must return identical arrays; the script checks that before
timing anything.
"""
import argparse
import time

import numpy as np

from compgrowth import _accel
from compgrowth.continuum import Ball, RadiusLaw, simulate_outbursts, sweep_times
from compgrowth.lattice import EdgeWeightDistribution, PassageTimeField, competing_territories


def lattice_case(half):
    f = PassageTimeField(EdgeWeightDistribution.exponential(1.0), 11, ([-half] * 2, [half] * 2))
    f.box_weights()
    sites = np.array([[half // 2, 0], [-half // 2, 0]])
    return lambda: competing_territories(f, sites).winner


def continuum_case(side):
    ev = simulate_outbursts(([0, 0], [side, side]), 1.6 * side, RadiusLaw.constant(1.0), 5)
    rng = np.random.default_rng(0)
    targets = rng.uniform(2, side - 2, size=(500, 2))
    return lambda: sweep_times(ev, Ball([side / 2, side / 2]), targets)[1], ev.count


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def compare(label, fn, repeat):
    out = {}
    for flag in (True, False):
        _accel.USE_NUMBA = flag
        out[flag] = fn()
    if not np.array_equal(out[True], out[False]):
        raise SystemExit(f"{label}: backends disagree")
    timing = {}
    for flag in (True, False):
        _accel.USE_NUMBA = flag
        timing[flag] = best_of(fn, repeat)
    _accel.USE_NUMBA = True
    print(f"{label:<34} {timing[True] * 1e3:10.1f} {timing[False] * 1e3:10.1f} "
          f"{timing[False] / timing[True]:8.1f}x")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _accel.HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'case':<34} {'numba ms':>10} {'fallback':>10} {'speedup':>9}")
    for half in (32, 64, 96):
        compare(f"lattice 2 types, {2 * half + 1}^2 sites", lattice_case(half), args.repeat)
    for side in (16, 24, 32):
        fn, n = continuum_case(side)
        compare(f"continuum sweep, {n} events", fn, args.repeat)


if __name__ == "__main__":
    main()
