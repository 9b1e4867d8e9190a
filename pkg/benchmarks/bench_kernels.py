"""Compare the numba kernels with their NumPy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is warmed up once (numba compilation) before timing and the
outputs of both paths are checked to agree.
"""

import argparse
from timeit import default_timer as timer

import numpy as np

from w1ot import kernels
from w1ot._accel import NUMBA_AVAILABLE


def best_of(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = timer()
        fn()
        best = min(best, timer() - t0)
    return best * 1e3


def cases(rng):
    act = rng.standard_normal((256, 64))
    grad = rng.standard_normal((256, 64))
    _, perm = kernels.groupsort_forward_numpy(act, 4)
    X = rng.standard_normal((1024, 2))
    Y = rng.standard_normal((1024, 2)) + 1.0
    gammas = np.array([2.0, 1.0, 0.5, 0.1, 0.01, 0.005])
    cost = np.abs(rng.standard_normal((256, 256)))
    return [
        ("groupsort_forward 256x64", lambda: kernels.groupsort_forward_numba(act, 4),
         lambda: kernels.groupsort_forward_numpy(act, 4)),
        ("groupsort_backward 256x64", lambda: kernels.groupsort_backward_numba(grad, perm),
         lambda: kernels.groupsort_backward_numpy(grad, perm)),
        ("rbf_kernel_sums 1024x1024", lambda: kernels.rbf_kernel_sums_numba(X, Y, gammas),
         lambda: kernels.rbf_kernel_sums_numpy(X, Y, gammas)),
        ("linear_assignment 256", lambda: kernels.linear_assignment_numba(cost),
         lambda: kernels.linear_assignment_numpy(cost)),
    ]


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-12, atol=1e-12)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'kernel':<28}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}  agree")
    for name, fast, slow in cases(np.random.default_rng(0)):
        agree = _same(fast(), slow())
        t_fast, t_slow = best_of(fast, args.repeat), best_of(slow, args.repeat)
        print(f"{name:<28}{t_fast:>10.3f}{t_slow:>10.3f}{t_slow / t_fast:>8.1f}x  {agree}")


if __name__ == "__main__":
    main()
