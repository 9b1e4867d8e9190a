"""Adversarial learning of a per-sample step size along the frozen potential's gradient."""

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .dual import DualTrainConfig, NetworkConfig, as_matrix, train_potential
from .errors import ConfigError, NumericalError, ShapeError, UsageError
from .optim import AdamState, adam_step

logger = logging.getLogger(__name__)

DIRECTION_FLOOR = 1e-8
STEP_INIT_BIAS = -2.0


class MLP:
    """Plain ReLU network ``d -> hidden... -> 1`` with a configurable output squashing."""

    def __init__(self, in_dim, hidden=(64, 64, 64, 64), rng=None, out_bias=0.0):
        rng = np.random.default_rng(rng)
        self.in_dim = int(in_dim)
        self.hidden = tuple(int(h) for h in hidden)
        if self.in_dim < 1 or any(h < 1 for h in self.hidden):
            raise ConfigError(f"layer sizes must be positive, got {self.in_dim} and {self.hidden}")
        sizes = (self.in_dim,) + self.hidden + (1,)
        self.weights = []
        self.biases = []
        for a, b in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / math.sqrt(a)
            self.weights.append(Tensor(rng.uniform(-bound, bound, size=(b, a)), requires_grad=True))
            self.biases.append(Tensor(rng.uniform(-bound, bound, size=(1, b)), requires_grad=True))
        self.biases[-1].values[:] = out_bias

    def parameters(self, prefix=""):
        out = []
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            out.append((f"{prefix}layers.{i}.weight", W))
            out.append((f"{prefix}layers.{i}.bias", b))
        return out

    def pre_activation(self, X, detach=False):
        h = ad.as_tensor(X)
        if h.shape[1] != self.in_dim:
            raise ShapeError(f"network expects {self.in_dim} features, got {h.shape[1]}")
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if detach:
                W, b = W.detach(), b.detach()
            h = ad.affine(h, W, b)
            if i < last:
                h = ad.relu(h)
        return h

    def state(self):
        return [
            {"in": W.shape[1], "out": W.shape[0], "weight": W.values.ravel().tolist(),
             "bias": b.values.ravel().tolist()}
            for W, b in zip(self.weights, self.biases)
        ]

    @classmethod
    def from_state(cls, layers, **kwargs):
        net = cls.__new__(cls)
        net.in_dim = int(layers[0]["in"])
        net.hidden = tuple(int(l["out"]) for l in layers[:-1])
        net.weights = [Tensor(np.reshape(l["weight"], (l["out"], l["in"])), requires_grad=True) for l in layers]
        net.biases = [Tensor(np.reshape(l["bias"], (1, l["out"])), requires_grad=True) for l in layers]
        for key, value in kwargs.items():
            setattr(net, key, value)
        return net


class StepSizeNet(MLP):
    """Non-negative step size ``eta(x) = softplus(mlp(x))``."""

    def __init__(self, in_dim, hidden=(64, 64, 64, 64), rng=None, init_bias=STEP_INIT_BIAS):
        super().__init__(in_dim, hidden, rng, out_bias=init_bias)

    def forward(self, X, detach=False):
        return ad.softplus(self.pre_activation(X, detach))

    __call__ = forward

    def value(self, X):
        return self.forward(np.asarray(X, dtype=np.float64), detach=True).values[:, 0].copy()


class Discriminator(MLP):
    """Probability that a sample came from the target; trained through its logits."""

    def logits(self, X, detach=False):
        return self.pre_activation(X, detach)

    def forward(self, X, detach=False):
        return ad.sigmoid(self.logits(X, detach))

    __call__ = forward

    def value(self, X):
        return self.forward(np.asarray(X, dtype=np.float64), detach=True).values[:, 0].copy()


def unit_directions(f, X, floor=DIRECTION_FLOOR):
    """``grad f(x) / max(||grad f(x)||, floor)`` per row."""
    g = f.input_grad(X)
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    return g / np.maximum(norms, floor)


class TransportMap:
    """``T(x) = x - eta(x) * grad f(x) / max(||grad f(x)||, eps)`` with ``f`` and ``eta`` fixed."""

    def __init__(self, potential, stepsize, direction_floor=DIRECTION_FLOOR, dual_history=None,
                 gan_history=None, discriminator=None):
        if potential.in_dim != stepsize.in_dim:
            raise ShapeError(f"potential takes {potential.in_dim} features, step-size net {stepsize.in_dim}")
        self.potential = potential
        self.stepsize = stepsize
        self.direction_floor = float(direction_floor)
        self.dual_history = dual_history
        self.gan_history = gan_history
        self.discriminator = discriminator

    @property
    def dim(self):
        return self.potential.in_dim

    def transport(self, X):
        X = as_matrix(X)
        if X.shape[1] != self.dim:
            raise ShapeError(f"map expects {self.dim} features, got {X.shape[1]}")
        eta = self.stepsize.value(X)
        return X - eta[:, None] * unit_directions(self.potential, X, self.direction_floor)

    __call__ = transport


def _moved(stepsize, Xb, dirs, detach=False):
    """Graph node for ``x - eta(x) * dir`` with the direction held constant."""
    eta = stepsize.forward(Xb, detach=detach)
    return ad.sub(Tensor(Xb), ad.scale_rows(Tensor(dirs), eta))


def _prob_log(D, X, target_is_real):
    # -log D(x) when target_is_real else -log(1 - D(x)), per row
    if hasattr(D, "logits"):
        z = D.logits(X)
        return ad.softplus(ad.neg(z) if target_is_real else z)
    p = ad.as_tensor(D(ad.as_tensor(X)))
    if not target_is_real:
        p = ad.sub(Tensor(np.ones(p.shape)), p)
    return ad.neg(ad.log(p))


def generator_loss(D, tmap, X_src_batch):
    """``-mean log D(T(x))``; gradients reach only the step-size network.

    ``tmap`` is a :class:`TransportMap` or any callable returning transported
    rows (as a Tensor if gradients are wanted).  ``D`` is a
    :class:`Discriminator` or a callable returning probabilities.
    """
    X = as_matrix(X_src_batch)
    if len(X) == 0:
        raise UsageError("generator_loss needs a non-empty batch")
    if isinstance(tmap, TransportMap):
        dirs = unit_directions(tmap.potential, X, tmap.direction_floor)
        moved = _moved(tmap.stepsize, X, dirs)
    else:
        moved = tmap(X)
    return ad.mean(_prob_log(D, moved, True))


def discriminator_loss(D, tmap, X_src_batch, Y_tgt_batch):
    """``-mean log D(y) - mean log(1 - D(T(x)))`` with ``T(x)`` detached."""
    X, Y = as_matrix(X_src_batch), as_matrix(Y_tgt_batch)
    if len(X) == 0 or len(Y) == 0:
        raise UsageError("discriminator_loss needs non-empty batches")
    moved = tmap(X)
    moved = Tensor(moved.values if isinstance(moved, Tensor) else moved)
    real = ad.mean(_prob_log(D, Y, True))
    fake = ad.mean(_prob_log(D, moved, False))
    return ad.add(real, fake)


@dataclass
class GanTrainConfig:
    iterations: int = 10000
    batch_size: int = 256
    lr: float = 1e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.9
    adam_eps: float = 1e-8
    disc_steps_per_gen_step: int = 1
    hidden: tuple = (64, 64, 64, 64)
    seed: int = 0

    def validate(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.iterations < 1 or self.batch_size < 1:
            raise ConfigError("iterations and batch_size must be positive")
        if self.lr <= 0 or self.adam_eps <= 0:
            raise ConfigError("lr and adam_eps must be positive")
        for name in ("adam_beta1", "adam_beta2"):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in [0, 1)")
        if self.disc_steps_per_gen_step < 1:
            raise ConfigError("disc_steps_per_gen_step must be >= 1")
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ConfigError(f"hidden sizes must be positive, got {self.hidden}")
        return self


@dataclass
class GanHistory:
    gen_loss: list = field(default_factory=list)
    disc_loss: list = field(default_factory=list)
    elapsed_ms: list = field(default_factory=list)

    def __len__(self):
        return len(self.gen_loss)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "gen_loss", "disc_loss"])
            for i, (g, d) in enumerate(zip(self.gen_loss, self.disc_loss), 1):
                w.writerow([i, repr(g), repr(d)])

    def as_dict(self):
        return asdict(self)


def _checked(loss, what, it):
    value = loss.item()
    if not math.isfinite(value):
        raise NumericalError(f"{what} loss became {value} at GAN iteration {it}")
    return value


def _step(state, params, lr, it):
    try:
        adam_step(state, params, lr)
    except NumericalError as exc:
        raise NumericalError(f"GAN iteration {it}: {exc}") from None


def train_stepsize(f, source, target, cfg=None, return_discriminator=False):
    """Train ``eta`` against a discriminator with ``f`` frozen.

    Returns ``(StepSizeNet, GanHistory)``, plus the discriminator when asked.
    Each iteration takes ``disc_steps_per_gen_step`` discriminator steps, then
    one generator step; the two sides are batched independently with
    replacement.
    """
    cfg = (cfg or GanTrainConfig()).validate()
    X, Y = as_matrix(source), as_matrix(target)
    if X.shape[1] != Y.shape[1] or X.shape[1] != f.in_dim:
        raise ShapeError(f"dimension mismatch: source {X.shape[1]}, target {Y.shape[1]}, potential {f.in_dim}")
    eta_seq, disc_seq, sample_seq = np.random.SeedSequence(cfg.seed).spawn(3)
    eta = StepSizeNet(X.shape[1], cfg.hidden, np.random.default_rng(eta_seq))
    D = Discriminator(X.shape[1], cfg.hidden, np.random.default_rng(disc_seq))
    rng = np.random.default_rng(sample_seq)
    dirs = unit_directions(f, X)

    eta_params, d_params = eta.parameters(), D.parameters()
    eta_opt = AdamState(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    d_opt = AdamState(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    hist = GanHistory()
    B = cfg.batch_size
    start = time.perf_counter()
    for it in range(1, cfg.iterations + 1):
        for _ in range(cfg.disc_steps_per_gen_step):
            idx = rng.integers(len(X), size=B)
            yb = Y[rng.integers(len(Y), size=B)]
            moved = _moved(eta, X[idx], dirs[idx], detach=True)
            real = ad.mean(ad.softplus(ad.neg(D.logits(yb))))
            fake = ad.mean(ad.softplus(D.logits(moved)))
            d_loss = ad.add(real, fake)
            d_value = _checked(d_loss, "discriminator", it)
            ad.backward(d_loss)
            _step(d_opt, d_params, cfg.lr, it)

        idx = rng.integers(len(X), size=B)
        moved = _moved(eta, X[idx], dirs[idx])
        g_loss = ad.mean(ad.softplus(ad.neg(D.logits(moved, detach=True))))
        g_value = _checked(g_loss, "generator", it)
        ad.backward(g_loss)
        _step(eta_opt, eta_params, cfg.lr, it)

        hist.gen_loss.append(g_value)
        hist.disc_loss.append(d_value)
        hist.elapsed_ms.append((time.perf_counter() - start) * 1e3)
        if it % 1000 == 0 or it == cfg.iterations:
            logger.info("gan iter %d/%d: gen %.4f disc %.4f", it, cfg.iterations, g_value, d_value)
    if return_discriminator:
        return eta, hist, D
    return eta, hist


def fit_w1ot(source, target, dual_cfg=None, gan_cfg=None, net_cfg=None):
    """Potential first, then step size; returns the assembled :class:`TransportMap`."""
    X, Y = as_matrix(source), as_matrix(target)
    if X.shape[1] != Y.shape[1]:
        raise ShapeError(f"source has {X.shape[1]} features, target has {Y.shape[1]}")
    f, dual_hist = train_potential(X, Y, dual_cfg or DualTrainConfig(), net=net_cfg or NetworkConfig())
    eta, gan_hist, D = train_stepsize(f, X, Y, gan_cfg, return_discriminator=True)
    return TransportMap(f, eta, dual_history=dual_hist, gan_history=gan_hist, discriminator=D)
