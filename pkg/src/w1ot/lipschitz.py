"""1-Lipschitz GroupSort networks built from orthonormalised linear layers."""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, NumericalError, ShapeError

METHODS = ("cayley", "bjorck")
POWER_ITERS = 20
LIPSCHITZ_TOL = 1e-3

_power_starts = {}


def _power_start(n):
    # fixed pseudo-random start vector: never orthogonal to a structured top singular vector
    if n not in _power_starts:
        v = np.random.default_rng(12345).standard_normal(n)
        _power_starts[n] = v / np.linalg.norm(v)
    return _power_starts[n]


def spectral_norm_estimate(M, iters=POWER_ITERS):
    """Power-iteration estimate of the largest singular value of ``M``."""
    M = np.asarray(M, dtype=np.float64)
    v = _power_start(M.shape[1])
    sigma = 0.0
    for _ in range(iters):
        u = M @ v
        un = np.linalg.norm(u)
        if not un > 0:
            return 0.0
        u /= un
        v = M.T @ u
        sigma = np.linalg.norm(v)
        if not sigma > 0:
            return 0.0
        v = v / sigma
    return float(sigma)


def spectral_prescale(M):
    """Scale ``M`` by ``1 / (sigma_hat + 1e-6)`` so Björck starts in its basin.

    The scale factor is treated as a constant during differentiation.
    """
    M = ad.as_tensor(M)
    sigma = spectral_norm_estimate(M.values)
    if not (np.isfinite(sigma) and sigma > 0):
        raise NumericalError(f"spectral pre-scaling failed: estimate {sigma!r} is not positive")
    return ad.scale(M, 1.0 / (sigma + 1e-6))


def bjorck_orthonormalize(M, iters=25, beta=0.5):
    """First-order Björck iteration ``W <- W (I + beta (I - W^T W))``.

    Evaluated through the smaller Gram matrix, which is algebraically the
    same update.  ``M`` should already satisfy ``||M||_2 <= 1``.
    """
    if iters < 1:
        raise ConfigError(f"bjorck iters must be >= 1, got {iters}")
    W = ad.as_tensor(M)
    rows, cols = W.shape
    for _ in range(iters):
        if rows <= cols:
            gram_term = ad.matmul(ad.matmul(W, ad.transpose(W)), W)
        else:
            gram_term = ad.matmul(W, ad.matmul(ad.transpose(W), W))
        W = ad.add(W, ad.scale(ad.sub(W, gram_term), beta))
    return W


def cayley_orthonormalize(M):
    """Top-left ``d_out x d_in`` block of the Cayley transform of ``skew(pad(M))``.

    With ``B = I - A`` the transform is ``(I - A)^{-1}(I + A) = 2 B^{-1} - I``.
    For rectangular ``M`` the padded skew matrix is zero outside the first
    ``k = min(d_out, d_in)`` rows and columns, so a Schur complement shrinks
    the solve to ``k x k``.  With ``S`` the skew part of the leading square
    block and ``R`` half the remaining columns (wide) or rows (tall):

    * wide: ``Z = (I + S + R R^T)^{-1}``, ``W = [2 Z^T - I, 2 Z^T R]``;
    * tall: ``X = (I - S + R^T R)^{-1}``, ``W = [2 X - I; 2 R X]``.
    """
    M = ad.as_tensor(M)
    rows, cols = M.shape
    k = min(rows, cols)
    sq = M if rows == cols else ad.block(M, k, k)
    S = ad.scale(ad.sub(sq, ad.transpose(sq)), 0.5)
    eye = Tensor.eye(k)
    if rows == cols:
        return ad.sub(ad.scale(ad.mat_inverse(ad.sub(eye, S)), 2.0), eye)
    if rows < cols:
        R = ad.scale(ad.block(M, k, cols - k, 0, k), 0.5)
        Zt = ad.transpose(ad.mat_inverse(ad.add(ad.add(eye, S), ad.matmul(R, ad.transpose(R)))))
        left = ad.sub(ad.scale(Zt, 2.0), eye)
        right = ad.scale(ad.matmul(Zt, R), 2.0)
        return ad.add(ad.pad(left, k, cols), ad.pad(right, k, cols, 0, k))
    R = ad.scale(ad.block(M, rows - k, k, k, 0), 0.5)
    X = ad.mat_inverse(ad.add(ad.sub(eye, S), ad.matmul(ad.transpose(R), R)))
    top = ad.sub(ad.scale(X, 2.0), eye)
    bottom = ad.scale(ad.matmul(R, X), 2.0)
    return ad.add(ad.pad(top, rows, k), ad.pad(bottom, rows, k, k, 0))


def orthonormality_defect(W):
    """``||W W^T - I||_F`` for wide/square ``W``, ``||W^T W - I||_F`` for tall."""
    W = np.asarray(W.values if isinstance(W, Tensor) else W, dtype=np.float64)
    r, c = W.shape
    gram = W @ W.T if r <= c else W.T @ W
    return float(np.linalg.norm(gram - np.eye(gram.shape[0])))


class OrthonormalLayer:
    """Affine layer ``h W^T + b`` whose ``W`` is orthonormalised on every forward."""

    def __init__(self, d_in, d_out, method="cayley", bjorck_iters=25, bjorck_beta=0.5, rng=None):
        if method not in METHODS:
            raise ConfigError(f"unknown orthonormalization method {method!r}; choose from {METHODS}")
        if d_in < 1 or d_out < 1:
            raise ConfigError(f"layer sizes must be positive, got {d_in}->{d_out}")
        rng = np.random.default_rng(rng)
        bound = 1.0 / np.sqrt(d_in)
        self.d_in = d_in
        self.d_out = d_out
        self.method = method
        self.bjorck_iters = int(bjorck_iters)
        self.bjorck_beta = float(bjorck_beta)
        self.raw_weight = Tensor(rng.uniform(-bound, bound, size=(d_out, d_in)), requires_grad=True)
        self.bias = Tensor(np.zeros((1, d_out)), requires_grad=True)

    def weight(self, raw=None):
        """Effective (orthonormalised) weight as a graph node."""
        M = self.raw_weight if raw is None else raw
        if self.d_out == 1:
            return ad.normalize_rows(M)
        if self.method == "cayley":
            return cayley_orthonormalize(M)
        return bjorck_orthonormalize(spectral_prescale(M), self.bjorck_iters, self.bjorck_beta)

    def forward(self, h, weight=None, bias=None):
        h = ad.as_tensor(h)
        if h.shape[1] != self.d_in:
            raise ShapeError(f"layer expects {self.d_in} input features, got {h.shape[1]}")
        W = self.weight() if weight is None else weight
        b = self.bias if bias is None else bias
        return ad.affine(h, W, b)

    __call__ = forward


class PotentialNet:
    """1-Lipschitz scalar network: orthonormal layers with GroupSort in between."""

    def __init__(self, in_dim, hidden=(64, 64, 64, 64), group_size=4, method="cayley",
                 bjorck_iters=25, bjorck_beta=0.5, seed=0):
        hidden = tuple(int(h) for h in hidden)
        if group_size < 1:
            raise ConfigError(f"group_size must be positive, got {group_size}")
        for width in hidden:
            if width % group_size:
                raise ConfigError(f"hidden width {width} is not divisible by group_size {group_size}")
            if width == group_size and group_size > 1:
                raise ConfigError(
                    f"group_size {group_size} equals hidden width {width}: GroupSort degenerates "
                    "to a full sort of the layer; use a smaller group"
                )
        self.in_dim = int(in_dim)
        self.hidden = hidden
        self.group_size = int(group_size)
        self.method = method
        self.bjorck_iters = int(bjorck_iters)
        self.bjorck_beta = float(bjorck_beta)
        rng = np.random.default_rng(seed)
        sizes = (self.in_dim,) + hidden + (1,)
        self.layers = [
            OrthonormalLayer(a, b, method, bjorck_iters, bjorck_beta, rng)
            for a, b in zip(sizes[:-1], sizes[1:])
        ]

    def parameters(self):
        out = []
        for i, layer in enumerate(self.layers):
            out.append((f"layers.{i}.raw_weight", layer.raw_weight))
            out.append((f"layers.{i}.bias", layer.bias))
        return out

    def weights(self):
        """Orthonormalised weights and biases, differentiable w.r.t. the raw parameters."""
        return [(layer.weight(), layer.bias) for layer in self.layers]

    def frozen_weights(self):
        """Orthonormalised weights as constants (no graph to the parameters)."""
        return [
            (Tensor(layer.weight(layer.raw_weight.detach()).values), layer.bias.detach())
            for layer in self.layers
        ]

    def apply(self, X, weights):
        h = ad.as_tensor(X)
        if h.shape[1] != self.in_dim:
            raise ShapeError(f"potential expects {self.in_dim} features, got {h.shape[1]}")
        last = len(self.layers) - 1
        for i, (layer, (W, b)) in enumerate(zip(self.layers, weights)):
            h = layer.forward(h, W, b)
            if i < last:
                h = ad.groupsort(h, self.group_size)
        return h

    def forward(self, X):
        return self.apply(X, self.weights())

    __call__ = forward

    def value(self, X, weights=None):
        """Plain evaluation as a NumPy vector of length ``m``."""
        weights = self.frozen_weights() if weights is None else weights
        return self.apply(np.asarray(X, dtype=np.float64), weights).values[:, 0].copy()

    def input_grad(self, X, weights=None):
        """Row-wise gradient of the output w.r.t. the input; parameters untouched."""
        weights = self.frozen_weights() if weights is None else weights
        leaf = Tensor(np.array(X, dtype=np.float64), requires_grad=True)
        ad.backward(ad.sum(self.apply(leaf, weights)))
        return leaf.grad

    def layer_defects(self):
        return [orthonormality_defect(W) for W, _ in self.frozen_weights()]


def potential_forward(f, X):
    return f.forward(X)


def potential_input_grad(f, X):
    return f.input_grad(X)


@dataclass(frozen=True)
class LipschitzAudit:
    max_ratio: float
    pairs_used: int
    tolerance: float = LIPSCHITZ_TOL

    @property
    def violated(self):
        return self.max_ratio > 1.0 + self.tolerance


def lipschitz_audit(f, n_pairs, box, seed=0, local_scale=1e-3):
    """Largest ``|f(x) - f(y)| / ||x - y||`` over sampled pairs in ``box``.

    ``box`` is ``(low, high)``, scalars or per-feature arrays.  Half the pairs
    are uniform in the box; the other half are close pairs
    (``||x - y|| = local_scale * box diameter``), which probe the local slope.
    Pairs closer than 1e-9 are skipped.
    """
    if n_pairs < 1:
        raise ConfigError("n_pairs must be >= 1")
    rng = np.random.default_rng(seed)
    d = f.in_dim
    low = np.broadcast_to(np.asarray(box[0], dtype=np.float64), (d,))
    high = np.broadcast_to(np.asarray(box[1], dtype=np.float64), (d,))
    n_far = n_pairs - n_pairs // 2
    n_near = n_pairs // 2
    x = rng.uniform(low, high, size=(n_pairs, d))
    y = np.empty_like(x)
    y[:n_far] = rng.uniform(low, high, size=(n_far, d))
    step = rng.standard_normal((n_near, d))
    step /= np.linalg.norm(step, axis=1, keepdims=True)
    radius = local_scale * max(float(np.linalg.norm(high - low)), 1e-12)
    y[n_far:] = x[n_far:] + radius * step

    weights = f.frozen_weights()
    fx = f.value(x, weights)
    fy = f.value(y, weights)
    dist = np.linalg.norm(x - y, axis=1)
    keep = dist >= 1e-9
    if not keep.any():
        return LipschitzAudit(0.0, 0)
    ratio = np.abs(fx[keep] - fy[keep]) / dist[keep]
    return LipschitzAudit(float(ratio.max()), int(keep.sum()))
