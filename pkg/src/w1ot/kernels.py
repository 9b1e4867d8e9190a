"""Hot inner loops, each with a numba kernel and a NumPy fallback.

The public functions at the bottom dispatch on :data:`w1ot._accel.USE_NUMBA`.
The ``*_numba`` / ``*_numpy`` variants stay importable so tests and the
benchmark script can exercise both paths explicitly.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

__all__ = [
    "groupsort_forward",
    "groupsort_backward",
    "rbf_kernel_sums",
    "linear_assignment",
]


# --------------------------------------------------------------------------
# GroupSort
# --------------------------------------------------------------------------


@njit
def _sort4_rows(x, out, perm):
    # stable 5-comparator network; swaps only on strict inversions
    m, n = x.shape
    for i in range(m):
        for s in range(0, n, 4):
            v0 = x[i, s]
            v1 = x[i, s + 1]
            v2 = x[i, s + 2]
            v3 = x[i, s + 3]
            p0 = s
            p1 = s + 1
            p2 = s + 2
            p3 = s + 3
            if v1 < v0:
                v0, v1 = v1, v0
                p0, p1 = p1, p0
            if v3 < v2:
                v2, v3 = v3, v2
                p2, p3 = p3, p2
            if v2 < v0 or (v2 == v0 and p2 < p0):
                v0, v2 = v2, v0
                p0, p2 = p2, p0
            if v3 < v1 or (v3 == v1 and p3 < p1):
                v1, v3 = v3, v1
                p1, p3 = p3, p1
            if v2 < v1 or (v2 == v1 and p2 < p1):
                v1, v2 = v2, v1
                p1, p2 = p2, p1
            out[i, s] = v0
            out[i, s + 1] = v1
            out[i, s + 2] = v2
            out[i, s + 3] = v3
            perm[i, s] = p0
            perm[i, s + 1] = p1
            perm[i, s + 2] = p2
            perm[i, s + 3] = p3


@njit
def _groupsort_forward_loops(x, group_size):
    m, n = x.shape
    out = np.empty_like(x)
    perm = np.empty((m, n), dtype=np.int64)
    if group_size == 4:
        _sort4_rows(x, out, perm)
        return out, perm
    for i in range(m):
        for start in range(0, n, group_size):
            # insertion sort with strict comparison: ties keep original order
            for k in range(group_size):
                val = x[i, start + k]
                j = k - 1
                while j >= 0 and out[i, start + j] > val:
                    out[i, start + j + 1] = out[i, start + j]
                    perm[i, start + j + 1] = perm[i, start + j]
                    j -= 1
                out[i, start + j + 1] = val
                perm[i, start + j + 1] = start + k
    return out, perm


@njit
def _groupsort_backward_loops(grad, perm):
    m, n = grad.shape
    out = np.zeros_like(grad)
    for i in range(m):
        for j in range(n):
            out[i, perm[i, j]] += grad[i, j]
    return out


def groupsort_forward_numba(x, group_size):
    return _groupsort_forward_loops(np.ascontiguousarray(x, dtype=np.float64), group_size)


def groupsort_backward_numba(grad, perm):
    return _groupsort_backward_loops(np.ascontiguousarray(grad, dtype=np.float64), perm)


def groupsort_forward_numpy(x, group_size):
    m, n = x.shape
    grouped = x.reshape(m, n // group_size, group_size)
    order = np.argsort(grouped, axis=-1, kind="stable")
    out = np.take_along_axis(grouped, order, axis=-1).reshape(m, n)
    offsets = np.arange(0, n, group_size, dtype=np.int64)[None, :, None]
    perm = (order + offsets).reshape(m, n)
    return out, perm


def groupsort_backward_numpy(grad, perm):
    out = np.zeros_like(grad)
    np.put_along_axis(out, perm, grad, axis=1)
    return out


# --------------------------------------------------------------------------
# RBF kernel sums (for MMD)
# --------------------------------------------------------------------------


@njit
def _rbf_sums_loops(X, Y, gammas):
    n, d = X.shape
    m = Y.shape[0]
    k = gammas.shape[0]
    sums = np.zeros(k)
    for i in range(n):
        row = np.zeros(k)
        for j in range(m):
            sq = 0.0
            for c in range(d):
                diff = X[i, c] - Y[j, c]
                sq += diff * diff
            for g in range(k):
                row[g] += np.exp(-gammas[g] * sq)
        for g in range(k):
            sums[g] += row[g]
    return sums


def rbf_kernel_sums_numba(X, Y, gammas):
    return _rbf_sums_loops(
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(Y, dtype=np.float64),
        np.asarray(gammas, dtype=np.float64),
    )


def rbf_kernel_sums_numpy(X, Y, gammas, chunk=256):
    gammas = np.asarray(gammas, dtype=np.float64)
    sums = np.zeros(gammas.shape[0])
    for start in range(0, X.shape[0], chunk):
        block = X[start:start + chunk]
        sq = ((block[:, None, :] - Y[None, :, :]) ** 2).sum(axis=-1)
        for g, gamma in enumerate(gammas):
            sums[g] += np.exp(-gamma * sq).sum()
    return sums


# --------------------------------------------------------------------------
# Linear assignment (shortest augmenting path with potentials)
# --------------------------------------------------------------------------


@njit
def _assignment_loops(cost):
    n = cost.shape[0]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=np.int64)  # match[j]: row (1-based) on column j
    way = np.zeros(n + 1, dtype=np.int64)
    minv = np.empty(n + 1)
    used = np.zeros(n + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv[:] = inf
        used[:] = False
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while True:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
            if j0 == 0:
                break
    assignment = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        assignment[match[j] - 1] = j - 1
    return assignment


def linear_assignment_numba(cost):
    return _assignment_loops(np.ascontiguousarray(cost, dtype=np.float64))


def linear_assignment_numpy(cost):
    """Same algorithm as the numba kernel with the column scan vectorised."""
    cost = np.asarray(cost, dtype=np.float64)
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    padded = np.zeros((n + 1, n + 1))
    padded[1:, 1:] = cost
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            free = ~used
            free[0] = False
            cur = padded[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            masked = np.where(free, minv, np.inf)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            u[match[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while True:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
            if j0 == 0:
                break
    assignment = np.empty(n, dtype=np.int64)
    assignment[match[1:] - 1] = np.arange(n)
    return assignment


if USE_NUMBA:
    groupsort_forward = groupsort_forward_numba
    groupsort_backward = groupsort_backward_numba
    rbf_kernel_sums = rbf_kernel_sums_numba
    linear_assignment = linear_assignment_numba
else:
    groupsort_forward = groupsort_forward_numpy
    groupsort_backward = groupsort_backward_numpy
    rbf_kernel_sums = rbf_kernel_sums_numpy
    linear_assignment = linear_assignment_numpy
