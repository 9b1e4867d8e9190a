"""Timing sweep of the dual-training loop over input dimension."""

import numpy as np

from .dual import DualTrainConfig, NetworkConfig, train_potential

BENCH_ROWS = 512


def synthetic_pair(dim, n=BENCH_ROWS, seed=0):
    """Two unit-variance Gaussian clouds offset by 1 along every axis."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, dim)), rng.standard_normal((n, dim)) + 1.0


def time_dual(dim, iters, seed=0, network=None):
    """Milliseconds per 1000 dual iterations at ``dim``.

    With at least 1000 iterations the fastest 1000-iteration window is
    reported, which screens out scheduler noise; shorter runs are scaled.
    """
    X, Y = synthetic_pair(dim, seed=seed)
    cfg = DualTrainConfig(iterations=iters, seed=seed, eval_every=iters)
    _, hist = train_potential(X, Y, cfg, net=network or NetworkConfig())
    if hist.ms_per_1000:
        return min(hist.ms_per_1000)
    return hist.elapsed_ms[-1] * 1000.0 / iters


def run_bench(dims, iters, seed=0, network=None):
    return [(int(d), time_dual(int(d), iters, seed, network)) for d in dims]
