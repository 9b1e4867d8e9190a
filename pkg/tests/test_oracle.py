import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from w1ot.errors import DataError, ShapeError
from w1ot.lipschitz import PotentialNet
from w1ot.oracle import MAX_MATCHING_N, data_diameter, dual_gap, w1_1d, w1_matching


def brute_force(X, Y):
    D = np.linalg.norm(X[:, None] - Y[None], axis=-1)
    n = len(X)
    return min(D[np.arange(n), list(p)].mean() for p in itertools.permutations(range(n)))


def test_w1_1d_examples():
    assert w1_1d([0.0], [2.0]) == 2.0
    assert w1_1d([0.0, 1.0], [2.0, 3.0]) == 2.0
    assert w1_1d([0.0, 4.0], [1.0, 2.0]) == 1.5
    with pytest.raises(ShapeError):
        w1_1d([0.0], [1.0, 2.0])


def test_matching_examples():
    X = np.random.default_rng(0).standard_normal((30, 3))
    perm = np.random.default_rng(1).permutation(30)
    res = w1_matching(X, X[perm])
    assert res.cost == 0.0
    np.testing.assert_array_equal(perm[res.assignment], np.arange(30))
    with pytest.raises(ShapeError):
        w1_matching(X, X[:10])
    with pytest.raises(DataError, match="subsample"):
        w1_matching(np.zeros((MAX_MATCHING_N + 1, 1)), np.zeros((MAX_MATCHING_N + 1, 1)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6))
def test_matching_equals_brute_force(seed, n):
    rng = np.random.default_rng(seed)
    X, Y = rng.standard_normal((n, 2)), rng.standard_normal((n, 2))
    res = w1_matching(X, Y)
    assert sorted(res.assignment) == list(range(n))
    assert res.cost == pytest.approx(brute_force(X, Y), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 40))
def test_1d_matching_agrees_with_sort(seed, n):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal(n), rng.standard_normal(n) * 2
    assert w1_matching(x, y).cost == pytest.approx(w1_1d(x, y), abs=1e-10)


def test_diameter_and_dual_gap():
    X = np.array([[0.0, 0.0], [3.0, 0.0]])
    Y = np.array([[0.0, 4.0], [1.0, 1.0]])
    assert data_diameter(X, Y) == 5.0
    f = PotentialNet(2, seed=0)
    assert dual_gap(f, X, Y) >= -1e-3 * data_diameter(X, Y)
