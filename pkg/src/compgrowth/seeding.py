"""Deterministic seed derivation and order-independent replicate fan-out."""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def replicate_seed(master, *keys):
    """64-bit seed keyed by (master, *keys); independent of evaluation order."""
    state = np.random.SeedSequence([int(master) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    lo, hi = state.generate_state(2, np.uint32)
    return (int(hi) << 32) | int(lo)


def default_workers():
    return max(1, int(os.environ.get("COMPGROWTH_WORKERS", "1")))


def run_replicates(fn, seeds, workers=None):
    """``[fn(s) for s in seeds]`` on a thread pool, results in input order.

    The compiled kernels release the GIL, so threads give real parallelism
    without copying weight fields between processes.
    """
    workers = default_workers() if workers is None else int(workers)
    seeds = list(seeds)
    if workers <= 1 or len(seeds) <= 1:
        return [fn(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, seeds))
