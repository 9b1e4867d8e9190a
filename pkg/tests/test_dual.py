import csv
import math

import numpy as np
import pytest

from w1ot import datasets
from w1ot.dual import DualTrainConfig, NetworkConfig, dual_loss, dual_value, train_potential
from w1ot.errors import ConfigError, NumericalError, UsageError
from w1ot.lipschitz import PotentialNet
from w1ot.oracle import w1_matching


def _linear(sign):
    f = PotentialNet(1, hidden=(), seed=0)
    f.layers[0].raw_weight.values[:] = [[sign * 2.0]]
    return f


def test_dual_loss_examples():
    assert dual_loss(_linear(1), [[0.0]], [[2.0]]).item() == pytest.approx(2.0)
    assert dual_loss(_linear(-1), [[0.0]], [[2.0]]).item() == pytest.approx(-2.0)
    f = _linear(1)
    assert dual_loss(f, [[1.0], [1.0]], [[1.0]]).item() == 0.0
    with pytest.raises(UsageError):
        dual_loss(f, np.empty((0, 1)), [[1.0]])


def test_config_validation():
    with pytest.raises(ConfigError):
        DualTrainConfig(iterations=0).validate()
    with pytest.raises(ConfigError):
        DualTrainConfig(lr_min=1.0, lr_max=0.1).validate()
    with pytest.raises(ConfigError):
        NetworkConfig(method="svd").validate()


def test_same_distribution_gives_zero_dual():
    src, _ = datasets.generate("moons", 256, seed=0)
    _, hist = train_potential(src.features, src.features, DualTrainConfig(iterations=500, seed=1))
    assert -0.05 <= hist.final_dual <= 0.05


def test_dual_below_matching_oracle():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((64, 2))
    Y = rng.standard_normal((64, 2)) * 0.5 + [2.0, 1.0]
    _, hist = train_potential(X, Y, DualTrainConfig(iterations=2000, seed=4))
    exact = w1_matching(X, Y).cost
    assert hist.final_dual <= exact * 1.05
    assert hist.final_dual >= 0.8 * exact


def test_history_shape_and_determinism(tmp_path):
    src, tgt = datasets.generate("circles", 128, seed=2)
    cfg = DualTrainConfig(iterations=300, eval_every=100, seed=5)
    f1, h1 = train_potential(src.features, tgt.features, cfg)
    f2, h2 = train_potential(src.features, tgt.features, cfg)
    assert len(h1) == 300 and h1.full_iterations == [100, 200, 300]
    assert h1.dual_estimate == h2.dual_estimate
    assert h1.full_dual == h2.full_dual and h1.lr == h2.lr
    for a, b in zip(f1.parameters(), f2.parameters()):
        np.testing.assert_array_equal(a[1].values, b[1].values)
    assert h1.final_dual == dual_value(f1, src.features, tgt.features)

    h1.to_csv(tmp_path / "h.csv")
    rows = list(csv.reader(open(tmp_path / "h.csv")))
    assert rows[0] == ["iteration", "dual_estimate", "lr", "elapsed_ms"]
    assert len(rows) == 301 and float(rows[1][1]) == h1.dual_estimate[0]


@pytest.mark.parametrize("method", ["cayley", "bjorck"])
def test_orthonormality_holds_after_every_step(method):
    src, tgt = datasets.generate("moons", 128, seed=0)
    f = NetworkConfig(method=method).build(2, 0)
    for chunk in range(3):
        f, _ = train_potential(src.features, tgt.features, DualTrainConfig(iterations=50, seed=chunk), f=f)
        assert max(f.layer_defects()) <= 1e-3


def test_nan_data_aborts_with_iteration():
    X = np.ones((10, 2))
    X[3, 0] = math.inf
    with pytest.raises(NumericalError, match="iteration"):
        train_potential(X, np.zeros((10, 2)), DualTrainConfig(iterations=50, batch_size=32))
