"""Training the Kantorovich potential by maximising the Kantorovich-Rubinstein dual."""

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, NumericalError, ShapeError, UsageError
from .lipschitz import METHODS, PotentialNet
from .optim import AdamState, adam_step, cosine_lr

logger = logging.getLogger(__name__)


@dataclass
class NetworkConfig:
    hidden: tuple = (64, 64, 64, 64)
    group_size: int = 4
    method: str = "cayley"
    bjorck_iters: int = 25
    bjorck_beta: float = 0.5

    def validate(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ConfigError(f"hidden sizes must be positive, got {self.hidden}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.group_size < 1:
            raise ConfigError("group_size must be >= 1")
        if self.bjorck_iters < 1:
            raise ConfigError("bjorck_iters must be >= 1")
        return self

    def build(self, in_dim, seed):
        self.validate()
        return PotentialNet(in_dim, self.hidden, self.group_size, self.method,
                            self.bjorck_iters, self.bjorck_beta, seed=seed)


@dataclass
class DualTrainConfig:
    iterations: int = 10000
    batch_size: int = 256
    lr_max: float = 1e-2
    lr_min: float = 1e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.5
    adam_eps: float = 1e-8
    seed: int = 0
    eval_every: int = 100

    def validate(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2")
        if not 0 < self.lr_min <= self.lr_max:
            raise ConfigError(f"need 0 < lr_min <= lr_max, got {self.lr_min}, {self.lr_max}")
        for name in ("adam_beta1", "adam_beta2"):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in [0, 1)")
        if self.adam_eps <= 0 or self.eval_every < 1:
            raise ConfigError("adam_eps and eval_every must be positive")
        return self


@dataclass
class TrainHistory:
    """Per-iteration record of a dual training run.

    ``dual_estimate`` holds the mini-batch value of ``E_mu[f] - E_nu[f]``;
    ``full_dual`` holds the same quantity on the full datasets, evaluated at
    the iterations listed in ``full_iterations``.
    """

    dual_estimate: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    elapsed_ms: list = field(default_factory=list)
    full_iterations: list = field(default_factory=list)
    full_dual: list = field(default_factory=list)
    ms_per_1000: list = field(default_factory=list)

    def __len__(self):
        return len(self.dual_estimate)

    @property
    def final_dual(self):
        """Full-data dual value after the last iteration."""
        return self.full_dual[-1] if self.full_dual else math.nan

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "dual_estimate", "lr", "elapsed_ms"])
            for i, (d, lr, ms) in enumerate(zip(self.dual_estimate, self.lr, self.elapsed_ms), 1):
                w.writerow([i, repr(d), repr(lr), repr(ms)])

    def as_dict(self):
        return asdict(self)


def as_matrix(data):
    """Feature matrix of a Dataset, Tensor or array-like as 2-D float64."""
    values = getattr(data, "features", data)
    values = getattr(values, "values", values)
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-D feature matrix, got shape {arr.shape}")
    return arr


def dual_loss(f, X_src, Y_tgt, weights=None):
    """``-mean f(X_src) + mean f(Y_tgt)``; minimising it maximises the dual.

    Both batches go through the network as one stacked matrix.
    """
    X_src = np.asarray(getattr(X_src, "values", X_src), dtype=np.float64)
    Y_tgt = np.asarray(getattr(Y_tgt, "values", Y_tgt), dtype=np.float64)
    m, k = len(X_src), len(Y_tgt)
    if m == 0 or k == 0:
        raise UsageError("dual_loss needs non-empty source and target batches")
    if X_src.ndim != 2 or Y_tgt.ndim != 2 or X_src.shape[1] != Y_tgt.shape[1]:
        raise ShapeError(f"source batch {X_src.shape} and target batch {Y_tgt.shape} disagree")
    weights = f.weights() if weights is None else weights
    out = f.apply(np.vstack([X_src, Y_tgt]), weights)
    signs = np.concatenate([np.full(m, -1.0 / m), np.full(k, 1.0 / k)]).reshape(-1, 1)
    return ad.sum(ad.hadamard(out, signs))


def dual_value(f, X, Y, weights=None):
    """Full-data ``E_X[f] - E_Y[f]`` with frozen weights."""
    weights = f.frozen_weights() if weights is None else weights
    return float(f.value(X, weights).mean() - f.value(Y, weights).mean())


def train_potential(source, target, cfg=None, net=None, f=None):
    """Fit a 1-Lipschitz potential; returns ``(PotentialNet, TrainHistory)``.

    Mini-batches are drawn with replacement, independently for each side.
    ``f`` may be passed to continue training an existing network.
    """
    cfg = (cfg or DualTrainConfig()).validate()
    X, Y = as_matrix(source), as_matrix(target)
    if X.shape[1] != Y.shape[1]:
        raise ShapeError(f"source has {X.shape[1]} features, target has {Y.shape[1]}")
    if len(X) == 0 or len(Y) == 0:
        raise UsageError("source and target must be non-empty")
    init_seq, sample_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    if f is None:
        f = (net or NetworkConfig()).build(X.shape[1], np.random.default_rng(init_seq))
    rng = np.random.default_rng(sample_seq)
    params = f.parameters()
    state = AdamState(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    hist = TrainHistory()
    B = cfg.batch_size
    T = cfg.iterations

    start = time.perf_counter()
    block_start = start
    for it in range(1, T + 1):
        lr = cosine_lr(it - 1, T, cfg.lr_max, cfg.lr_min)
        xb = X[rng.integers(len(X), size=B)]
        yb = Y[rng.integers(len(Y), size=B)]
        loss = dual_loss(f, xb, yb)
        value = loss.item()
        if not math.isfinite(value):
            raise NumericalError(f"dual loss became {value} at iteration {it}")
        ad.backward(loss)
        try:
            adam_step(state, params, lr)
        except NumericalError as exc:
            raise NumericalError(f"iteration {it}: {exc}") from None

        now = time.perf_counter()
        hist.dual_estimate.append(-value)
        hist.lr.append(lr)
        hist.elapsed_ms.append((now - start) * 1e3)
        if it % 1000 == 0:
            hist.ms_per_1000.append((now - block_start) * 1e3)
            block_start = now
        if it % cfg.eval_every == 0 or it == T:
            hist.full_iterations.append(it)
            hist.full_dual.append(dual_value(f, X, Y))
            if it % 1000 == 0 or it == T:
                logger.info("dual iter %d/%d: estimate %.5f (lr %.2e)", it, T, hist.full_dual[-1], lr)
    return f, hist
