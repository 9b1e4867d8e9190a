"""Distributional metrics, the pairwise monotonicity audit and gradient-norm stats."""

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import kernels
from .errors import DataError, ShapeError

DEFAULT_MMD_SCALES = (2.0, 1.0, 0.5, 0.1, 0.01, 0.005)
DEFAULT_COS_TOL = -0.99


def _pair_check(X, Y, min_rows=1):
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[1]:
        raise ShapeError(f"feature dimensions disagree: {X.shape} vs {Y.shape}")
    if len(X) < min_rows or len(Y) < min_rows:
        raise DataError(f"need at least {min_rows} rows per side, got {len(X)} and {len(Y)}")
    return X, Y


def mmd_rbf(X, Y, scales=DEFAULT_MMD_SCALES):
    """Squared MMD (V-statistic), RBF kernel ``exp(-gamma ||a-b||^2)``, averaged over ``scales``."""
    X, Y = _pair_check(X, Y, min_rows=2)
    gammas = np.asarray(scales, dtype=np.float64)
    if gammas.size == 0 or np.any(gammas <= 0):
        raise ValueError("MMD scales must be a non-empty list of positive numbers")
    xx = kernels.rbf_kernel_sums(X, X, gammas) / (len(X) * len(X))
    yy = kernels.rbf_kernel_sums(Y, Y, gammas) / (len(Y) * len(Y))
    xy = kernels.rbf_kernel_sums(X, Y, gammas) / (len(X) * len(Y))
    return max(float(np.mean(xx + yy - 2.0 * xy)), 0.0)


def r2_feature_means(X, Y):
    """Squared Pearson correlation between the column-mean vectors of X and Y."""
    X, Y = _pair_check(X, Y)
    if X.shape[1] < 2:
        raise ShapeError("r2 of feature means needs at least 2 features")
    mx, my = X.mean(axis=0), Y.mean(axis=0)
    cx, cy = mx - mx.mean(), my - my.mean()
    denom = math.sqrt(float(cx @ cx) * float(cy @ cy))
    if denom == 0.0:
        raise DataError("correlation undefined: a feature-mean vector is constant")
    return float((cx @ cy) / denom) ** 2


def l2_feature_means(X, Y):
    X, Y = _pair_check(X, Y)
    return float(np.linalg.norm(X.mean(axis=0) - Y.mean(axis=0)))


def monotonicity_violation_rate(transport, X, n_pairs=10000, seed=0, cos_tol=DEFAULT_COS_TOL):
    """Fraction of sampled pairs whose displacement directions are (near) antipodal.

    A pair ``(x1, x2)`` violates when the cosine between ``x1 - x2`` and
    ``T(x1) - T(x2)`` is at most ``cos_tol``.  Rows are first drawn without
    replacement (``min(n, 2 n_pairs)`` of them) and only those are
    transported.  Degenerate pairs (equal points or equal images) are skipped.
    """
    X = np.asarray(X, dtype=np.float64)
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    if len(X) < 2:
        raise DataError("monotonicity audit needs at least two rows")
    rng = np.random.default_rng(seed)
    m = min(len(X), 2 * n_pairs)
    rows = X[rng.choice(len(X), size=m, replace=False)]
    if m >= 2 * n_pairs:
        i = np.arange(0, 2 * n_pairs, 2)
        j = i + 1
    else:
        i = rng.integers(m, size=n_pairs)
        j = (i + rng.integers(1, m, size=n_pairs)) % m
    mapped = np.asarray(transport(rows), dtype=np.float64)
    dx = rows[i] - rows[j]
    dt = mapped[i] - mapped[j]
    nx = np.linalg.norm(dx, axis=1)
    nt = np.linalg.norm(dt, axis=1)
    keep = (nx > 0) & (nt > 0)
    if not keep.any():
        raise DataError("all sampled pairs are degenerate; monotonicity rate undefined")
    cos = (dx[keep] * dt[keep]).sum(axis=1) / (nx[keep] * nt[keep])
    return float(np.mean(cos <= cos_tol))


def gradient_norm_stats(f, X):
    X = np.asarray(X, dtype=np.float64)
    if len(X) == 0:
        raise DataError("gradient_norm_stats needs at least one row")
    norms = np.linalg.norm(f.input_grad(X), axis=1)
    return float(norms.mean()), float(norms.min()), float(norms.max())


@dataclass
class MetricsReport:
    """Flat evaluation record; model-dependent fields are ``None`` without a model."""

    mmd: float
    r2_means: float
    l2_means: float
    n_pred: int
    n_target: int
    mmd_scales: list = field(default_factory=lambda: list(DEFAULT_MMD_SCALES))
    monotonicity_violation_rate: float = None
    grad_norm_mean: float = None
    grad_norm_min: float = None
    grad_norm_max: float = None
    n_source: int = None
    seed: int = 0

    def as_dict(self):
        return asdict(self)

    def to_json(self, **kwargs):
        return json.dumps(self.as_dict(), **kwargs)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


def evaluate(pred, target, scales=DEFAULT_MMD_SCALES, transport=None, potential=None, source=None,
             n_pairs=10000, cos_tol=DEFAULT_COS_TOL, seed=0):
    """Compute a :class:`MetricsReport` for predictions against an observed target."""
    pred, target = _pair_check(pred, target)
    report = MetricsReport(
        mmd=mmd_rbf(pred, target, scales),
        r2_means=r2_feature_means(pred, target),
        l2_means=l2_feature_means(pred, target),
        n_pred=len(pred),
        n_target=len(target),
        mmd_scales=[float(s) for s in scales],
        seed=seed,
    )
    if source is not None:
        source = np.asarray(source, dtype=np.float64)
        report.n_source = len(source)
        if transport is not None:
            report.monotonicity_violation_rate = monotonicity_violation_rate(
                transport, source, n_pairs, seed, cos_tol)
        if potential is not None:
            report.grad_norm_mean, report.grad_norm_min, report.grad_norm_max = gradient_norm_stats(
                potential, source)
    return report
