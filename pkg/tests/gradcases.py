"""Differentiable-op catalogue shared by the autodiff unit tests and the acceptance gate."""

import numpy as np

from w1ot import autodiff as ad
from w1ot.autodiff import Tensor


def op_catalogue(rng):
    """Scalar losses exercising every differentiable op; inputs are 3x3."""
    B = Tensor(rng.standard_normal((3, 3)))
    bias = Tensor(rng.standard_normal((1, 3)))
    s = Tensor(rng.uniform(0.5, 2.0, (3, 1)))
    SPD = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    return {
        "matmul": lambda a: ad.sum(ad.matmul(a, B)),
        "affine": lambda a: ad.sum(ad.hadamard(ad.affine(a, B, bias), ad.affine(a, B, bias))),
        "transpose": lambda a: ad.sum(ad.matmul(ad.transpose(a), B)),
        "solve": lambda a: ad.sum(ad.solve(ad.add(a, Tensor(SPD)), B)),
        "mat_inverse": lambda a: ad.sum(ad.mat_inverse(ad.add(a, Tensor(SPD)))),
        "pad": lambda a: ad.sum(ad.hadamard(ad.pad(a, 4, 4), ad.pad(a, 4, 4))),
        "block": lambda a: ad.sum(ad.hadamard(ad.block(a, 2, 2), ad.block(a, 2, 2))),
        "pad_offset": lambda a: ad.sum(ad.hadamard(ad.pad(a, 5, 4, 2, 1), ad.pad(a, 5, 4, 1, 1))),
        "block_offset": lambda a: ad.sum(ad.hadamard(ad.block(a, 2, 2, 1, 1), ad.block(a, 2, 2, 0, 1))),
        "add_sub": lambda a: ad.sum(ad.hadamard(ad.sub(ad.add(a, bias), B), a)),
        "neg_scale": lambda a: ad.sum(ad.hadamard(ad.neg(ad.scale(a, 1.7)), a)),
        "scale_rows": lambda a: ad.sum(ad.hadamard(ad.scale_rows(a, s), a)),
        "scale_rows_scale": lambda a: ad.sum(ad.scale_rows(B, ad.row_norm(a))),
        "mean": lambda a: ad.mean(ad.hadamard(a, a)),
        "sigmoid": lambda a: ad.sum(ad.sigmoid(a)),
        "softplus": lambda a: ad.sum(ad.softplus(a)),
        "relu": lambda a: ad.sum(ad.hadamard(ad.relu(a), B)),
        "log": lambda a: ad.sum(ad.log(ad.softplus(a))),
        "row_norm": lambda a: ad.sum(ad.row_norm(a)),
        "normalize_rows": lambda a: ad.sum(ad.hadamard(ad.normalize_rows(a), B)),
        "groupsort": lambda a: ad.sum(ad.hadamard(ad.groupsort(ad.pad(a, 3, 4), 2), ad.pad(B, 3, 4))),
    }
