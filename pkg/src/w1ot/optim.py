"""Adam and the cosine-annealing learning-rate schedule."""

import math

import numpy as np

from .errors import NumericalError, ShapeError


def cosine_lr(t, T, lr_max, lr_min):
    """``lr_min + (lr_max - lr_min)(1 + cos(pi t / T)) / 2``; clamps to ``lr_min`` past ``T``."""
    if T <= 0 or t >= T:
        return float(lr_min)
    t = max(t, 0)
    return float(lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * t / T)))


class AdamState:
    """First/second moment accumulators keyed by parameter name."""

    def __init__(self, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step = 0
        self.m = {}
        self.v = {}


def adam_step(state, params, lr, grads=None):
    """One bias-corrected Adam update, in place.

    ``params`` is a list of ``(name, Tensor)``; gradients are read from each
    tensor's ``grad`` unless ``grads`` (a name -> array mapping) is given.
    A missing gradient counts as zero.  Any non-finite gradient aborts the
    step before a single parameter is touched.
    """
    pending = []
    for name, p in params:
        g = grads[name] if grads is not None else p.grad
        if g is None:
            g = np.zeros_like(p.values)
        if g.shape != p.values.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter has {p.values.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in parameter {name!r} at optimizer step {state.step + 1}")
        pending.append((name, p, g))

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, p, g in pending:
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.values)
            state.v[name] = np.zeros_like(p.values)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.values -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.grad = None
