"""Tape-style reverse-mode automatic differentiation over dense float64 matrices.

Every value is a 2-D :class:`Tensor`.  An operation whose inputs include a
tensor with ``requires_grad`` records a node carrying a monotonically
increasing id, so sorting the reachable nodes by id gives a valid reverse
topological order.  :func:`backward` walks that order once, leaves the
adjoints on the leaves, and releases everything else; the graph cannot be
differentiated a second time.

Only row-wise bias broadcasting is supported (``(m, n) + (1, n)``), plus
the explicit :func:`scale_rows` for ``(m, n) * (m, 1)``.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg.lapack import dgetrf as _getrf, dgetrs as _getrs

from . import kernels
from .errors import ConfigError, NumericalError, ShapeError, UsageError

PIVOT_FLOOR = 1e-12
LOG_FLOOR = 1e-12

_ids = itertools.count()


class Tensor:
    """Row-major float64 matrix that may participate in a computation graph."""

    __slots__ = ("values", "requires_grad", "grad", "op", "_parents", "_backward", "_id", "_consumed")
    __array_priority__ = 1000

    def __init__(self, values, requires_grad=False):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"Tensor values must be at most 2-D, got shape {arr.shape}")
        self.values = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.op = "leaf"
        self._parents = ()
        self._backward = None
        self._id = None
        self._consumed = False

    @classmethod
    def eye(cls, n):
        return cls(np.eye(n))

    @property
    def shape(self):
        return self.values.shape

    @property
    def is_leaf(self):
        return self._id is None

    @property
    def T(self):
        return transpose(self)

    def numpy(self):
        return self.values

    def item(self):
        if self.values.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.values[0, 0])

    def detach(self):
        """Constant view of the same values; shares memory."""
        return Tensor(self.values)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, other)
        return hadamard(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __neg__(self):
        return neg(self)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(values, parents, backward, op):
    out = Tensor.__new__(Tensor)
    out.values = values
    out.grad = None
    out.op = op
    out._consumed = False
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
        out._id = next(_ids)
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
        out._id = None
    return out


def _sum_to(grad, shape):
    if grad.shape == shape:
        return grad
    return grad.sum(axis=0, keepdims=True)


def _broadcast_shape(a, b, op):
    sa, sb = a.shape, b.shape
    if sa == sb:
        return sa
    if sa[1] == sb[1] and (sa[0] == 1 or sb[0] == 1):
        return (max(sa[0], sb[0]), sa[1])
    raise ShapeError(f"{op}: incompatible shapes {sa} and {sb}")


# --------------------------------------------------------------------------
# Linear algebra
# --------------------------------------------------------------------------


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    av, bv = a.values, b.values

    def backward(g):
        ga = g @ bv.T if a.requires_grad else None
        gb = av.T @ g if b.requires_grad else None
        return ga, gb

    return _record(av @ bv, (a, b), backward, "matmul")


def affine(h, W, b):
    """``h W^T + b`` with ``b`` broadcast along rows; one graph node."""
    h, W, b = as_tensor(h), as_tensor(W), as_tensor(b)
    if h.shape[1] != W.shape[1]:
        raise ShapeError(f"affine: input {h.shape} does not match weight {W.shape}")
    if b.shape != (1, W.shape[0]):
        raise ShapeError(f"affine: bias must be (1, {W.shape[0]}), got {b.shape}")
    hv, Wv = h.values, W.values

    def backward(g):
        gh = g @ Wv if h.requires_grad else None
        gW = g.T @ hv if W.requires_grad else None
        gb = g.sum(axis=0, keepdims=True) if b.requires_grad else None
        return gh, gW, gb

    return _record(hv @ Wv.T + b.values, (h, W, b), backward, "affine")


def transpose(a):
    a = as_tensor(a)
    return _record(a.values.T.copy(), (a,), lambda g: (g.T,), "transpose")


def _lu(a):
    lu, piv, info = _getrf(a)
    pivots = np.abs(np.diag(lu))
    bad = np.flatnonzero(~(pivots > PIVOT_FLOOR))
    if bad.size:
        i = int(bad[0])
        raise NumericalError(
            f"singular matrix: LU pivot {i} has magnitude {pivots[i]:.3e} (floor {PIVOT_FLOOR:g})"
        )
    if info < 0:  # pragma: no cover - argument error inside LAPACK
        raise NumericalError(f"LAPACK getrf failed with info={info}")
    return lu, piv


def _lu_solve(factors, rhs, trans=0):
    x, info = _getrs(factors[0], factors[1], rhs, trans=trans)
    if info != 0:  # pragma: no cover
        raise NumericalError(f"LAPACK getrs failed with info={info}")
    return x


def solve(a, r, op="solve"):
    """``A^{-1} R`` for square ``A``, differentiable in both arguments."""
    a, r = as_tensor(a), as_tensor(r)
    n = a.shape[0]
    if a.shape[1] != n:
        raise ShapeError(f"{op}: matrix must be square, got {a.shape}")
    if r.shape[0] != n:
        raise ShapeError(f"{op}: right-hand side {r.shape} does not match matrix {a.shape}")
    factors = _lu(a.values)
    x = _lu_solve(factors, r.values)

    def backward(g):
        z = _lu_solve(factors, g, trans=1)
        ga = -z @ x.T if a.requires_grad else None
        return ga, (z if r.requires_grad else None)

    return _record(x, (a, r), backward, op)


def mat_inverse(a):
    a = as_tensor(a)
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"mat_inverse: matrix must be square, got {a.shape}")
    return solve(a, Tensor.eye(a.shape[0]), op="mat_inverse")


def pad(a, rows, cols, row0=0, col0=0):
    """Embed ``a`` in a ``rows x cols`` zero matrix with its corner at ``(row0, col0)``."""
    a = as_tensor(a)
    m, n = a.shape
    if row0 < 0 or col0 < 0 or rows < row0 + m or cols < col0 + n:
        raise ShapeError(f"pad: cannot embed {a.shape} at ({row0}, {col0}) into ({rows}, {cols})")
    out = np.zeros((rows, cols))
    out[row0:row0 + m, col0:col0 + n] = a.values
    return _record(out, (a,), lambda g: (g[row0:row0 + m, col0:col0 + n],), "pad")


def block(a, rows, cols, row0=0, col0=0):
    """The ``rows x cols`` sub-matrix of ``a`` starting at ``(row0, col0)``."""
    a = as_tensor(a)
    m, n = a.shape
    if row0 < 0 or col0 < 0 or row0 + rows > m or col0 + cols > n:
        raise ShapeError(f"block: ({rows}, {cols}) at ({row0}, {col0}) exceeds {a.shape}")

    def backward(g):
        full = np.zeros((m, n))
        full[row0:row0 + rows, col0:col0 + cols] = g
        return (full,)

    return _record(a.values[row0:row0 + rows, col0:col0 + cols].copy(), (a,), backward, "block")


# --------------------------------------------------------------------------
# Elementwise and reductions
# --------------------------------------------------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")
    sa, sb = a.shape, b.shape
    return _record(a.values + b.values, (a, b), lambda g: (_sum_to(g, sa), _sum_to(g, sb)), "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _record(a.values - b.values, (a, b), lambda g: (_sum_to(g, sa), -_sum_to(g, sb)), "sub")


def neg(a):
    a = as_tensor(a)
    return _record(-a.values, (a,), lambda g: (-g,), "neg")


def scale(a, c):
    a = as_tensor(a)
    c = float(c)
    return _record(a.values * c, (a,), lambda g: (g * c,), "scale")


def hadamard(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"hadamard: shapes differ, {a.shape} vs {b.shape}")
    av, bv = a.values, b.values
    return _record(av * bv, (a, b), lambda g: (g * bv, g * av), "hadamard")


def scale_rows(a, s):
    """Multiply row ``i`` of ``a`` (m x n) by ``s[i]`` (m x 1)."""
    a, s = as_tensor(a), as_tensor(s)
    if s.shape != (a.shape[0], 1):
        raise ShapeError(f"scale_rows: scale must be ({a.shape[0]}, 1), got {s.shape}")
    av, sv = a.values, s.values

    def backward(g):
        gs = (g * av).sum(axis=1, keepdims=True) if s.requires_grad else None
        return g * sv, gs

    return _record(av * sv, (a, s), backward, "scale_rows")


def sum(a):  # noqa: A001 - mirrors the op name
    a = as_tensor(a)
    shape = a.shape
    return _record(np.array([[a.values.sum()]]), (a,), lambda g: (np.full(shape, g[0, 0]),), "sum")


def mean(a):
    a = as_tensor(a)
    shape = a.shape
    size = a.values.size
    if size == 0:
        raise ShapeError("mean of an empty tensor")
    return _record(
        np.array([[a.values.mean()]]), (a,), lambda g: (np.full(shape, g[0, 0] / size),), "mean"
    )


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a):
    a = as_tensor(a)
    s = _sigmoid(a.values)
    return _record(s, (a,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def softplus(a):
    a = as_tensor(a)
    av = a.values
    return _record(np.logaddexp(0.0, av), (a,), lambda g: (g * _sigmoid(av),), "softplus")


def relu(a):
    a = as_tensor(a)
    mask = a.values > 0
    return _record(np.where(mask, a.values, 0.0), (a,), lambda g: (g * mask,), "relu")


def log(a):
    """Natural log with the input floored at ``LOG_FLOOR``."""
    a = as_tensor(a)
    av = a.values
    safe = np.maximum(av, LOG_FLOOR)
    live = av > LOG_FLOOR
    return _record(np.log(safe), (a,), lambda g: (np.where(live, g / safe, 0.0),), "log")


def row_norm(a):
    """Euclidean norm of each row, shape ``(m, 1)``."""
    a = as_tensor(a)
    av = a.values
    norms = np.sqrt((av * av).sum(axis=1, keepdims=True))

    def backward(g):
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(norms > 0, av / norms, 0.0)
        return (g * unit,)

    return _record(norms, (a,), backward, "row_norm")


def normalize_rows(a):
    """Each row divided by its Euclidean norm."""
    a = as_tensor(a)
    av = a.values
    norms = np.sqrt((av * av).sum(axis=1, keepdims=True))
    if not np.all(norms > 0):
        raise NumericalError("normalize_rows: a row has zero norm")
    unit = av / norms

    def backward(g):
        return ((g - unit * (g * unit).sum(axis=1, keepdims=True)) / norms,)

    return _record(unit, (a,), backward, "normalize_rows")


def groupsort(a, group_size):
    """Sort each contiguous group of ``group_size`` columns ascending."""
    a = as_tensor(a)
    n = a.shape[1]
    if group_size < 1 or n % group_size:
        raise ConfigError(f"groupsort: width {n} is not divisible by group_size {group_size}")
    if group_size == 1:
        return _record(a.values.copy(), (a,), lambda g: (g,), "groupsort")
    out, perm = kernels.groupsort_forward(a.values, group_size)
    return _record(out, (a,), lambda g: (kernels.groupsort_backward(g, perm),), "groupsort")


# --------------------------------------------------------------------------
# Backward pass
# --------------------------------------------------------------------------


@dataclass
class GradientSet:
    """Outcome of :func:`backward`: the leaves that received adjoints."""

    leaves: list
    nodes_visited: int

    def __getitem__(self, tensor):
        return tensor.grad


def _collect(loss):
    seen = set()
    nodes = []
    stack = [loss]
    while stack:
        t = stack.pop()
        if t._id is None or t._id in seen:
            continue
        seen.add(t._id)
        nodes.append(t)
        stack.extend(t._parents)
    nodes.sort(key=lambda t: t._id, reverse=True)
    return nodes


def backward(loss):
    """Propagate adjoints from a scalar ``loss`` to every ``requires_grad`` leaf."""
    if not isinstance(loss, Tensor):
        raise UsageError("backward() expects a Tensor")
    if loss.shape != (1, 1):
        raise UsageError(f"backward() needs a scalar (1x1) loss, got shape {loss.shape}")
    if loss._consumed:
        raise UsageError("backward() already ran on this graph; rebuild it before differentiating again")
    if not loss.requires_grad:
        raise UsageError("loss does not depend on any tensor with requires_grad=True")

    nodes = _collect(loss)
    loss.grad = np.ones((1, 1))
    leaves = {}
    for node in nodes:
        g = node.grad
        grads = node._backward(g)
        for parent, pg in zip(node._parents, grads):
            if pg is None or not parent.requires_grad:
                continue
            parent.grad = pg if parent.grad is None else parent.grad + pg
            if parent._id is None:
                leaves[id(parent)] = parent
        node.grad = None
        node._backward = None
        node._parents = ()
        node._consumed = True
    return GradientSet(leaves=list(leaves.values()), nodes_visited=len(nodes))


def grad_check(f, x, eps=1e-6):
    """Maximum relative disagreement between autodiff and central differences.

    ``f`` maps a Tensor to a 1x1 Tensor.  The per-coordinate error is
    ``|analytic - numeric| / (|analytic| + |numeric| + 1e-12)``.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise UsageError(f"grad_check: eps must lie in [1e-7, 1e-3], got {eps}")
    base = np.array(as_tensor(x).values, dtype=np.float64)
    leaf = Tensor(base.copy(), requires_grad=True)
    backward(f(leaf))
    analytic = leaf.grad if leaf.grad is not None else np.zeros_like(base)

    numeric = np.empty_like(base)
    probe = base.copy()
    for idx in np.ndindex(base.shape):
        orig = probe[idx]
        probe[idx] = orig + eps
        up = f(Tensor(probe.copy())).item()
        probe[idx] = orig - eps
        down = f(Tensor(probe.copy())).item()
        probe[idx] = orig
        numeric[idx] = (up - down) / (2.0 * eps)
    err = np.abs(analytic - numeric) / (np.abs(analytic) + np.abs(numeric) + 1e-12)
    return float(err.max())
