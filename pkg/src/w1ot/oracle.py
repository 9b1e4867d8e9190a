"""Exact W1 between equal-size empirical measures via min-cost assignment."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from . import kernels
from .errors import DataError, ShapeError

MAX_MATCHING_N = 2048


@dataclass(frozen=True)
class MatchingResult:
    cost: float
    assignment: np.ndarray  # assignment[i] = target index matched to source i


def w1_1d(x, y):
    """W1 of two equal-size 1-D samples: sorted matching, mean absolute gap."""
    x = np.sort(np.asarray(x, dtype=np.float64).ravel())
    y = np.sort(np.asarray(y, dtype=np.float64).ravel())
    if x.size != y.size:
        raise ShapeError(f"w1_1d needs equal sizes, got {x.size} and {y.size}")
    if x.size == 0:
        raise DataError("w1_1d needs at least one point per side")
    return float(np.abs(x - y).mean())


def _as_points(A):
    A = np.asarray(A, dtype=np.float64)
    return A.reshape(-1, 1) if A.ndim == 1 else A


def w1_matching(X, Y):
    """Exact min-cost bijection under Euclidean cost; cost is the mean distance."""
    X, Y = _as_points(X), _as_points(Y)
    if X.shape[0] != Y.shape[0]:
        raise ShapeError(f"w1_matching needs equal row counts, got {X.shape[0]} and {Y.shape[0]}")
    if X.shape[1] != Y.shape[1]:
        raise ShapeError(f"feature dimensions differ: {X.shape[1]} vs {Y.shape[1]}")
    n = X.shape[0]
    if n == 0:
        raise DataError("w1_matching needs at least one point per side")
    if n > MAX_MATCHING_N:
        raise DataError(f"n={n} exceeds the exact-matching limit {MAX_MATCHING_N}; subsample both sides")
    cost = cdist(X, Y)
    assignment = kernels.linear_assignment(cost)
    return MatchingResult(float(cost[np.arange(n), assignment].mean()), assignment)


def data_diameter(*arrays):
    """Largest pairwise Euclidean distance over the union of the point sets."""
    pts = np.vstack([_as_points(a) for a in arrays])
    if len(pts) > 4096:
        # diameter is attained on the convex hull; bound with the bounding box instead of O(n^2)
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    return float(cdist(pts, pts).max())


def dual_gap(f, X, Y):
    """Exact W1 minus the potential's dual value ``mean f(X) - mean f(Y)``."""
    X, Y = _as_points(X), _as_points(Y)
    exact = w1_matching(X, Y).cost
    weights = f.frozen_weights()
    return exact - float(f.value(X, weights).mean() - f.value(Y, weights).mean())
