"""Toy generators, CSV I/O, splitting and standardisation."""

import csv
import math
import os
import re
import tempfile
from dataclasses import dataclass, field

import numpy as np
from sklearn import datasets as skd

from .errors import ConfigError, DataError

_NAME_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")

TOY_DATASETS = ("bookshelf", "circles", "swiss_roll", "moons")


@dataclass
class Dataset:
    """A named ``n x d`` feature matrix.

    ``labels`` carries optional per-row audit labels (circle ring, moon id);
    they are never part of ``features``.
    """

    name: str
    features: np.ndarray
    feature_names: list
    seed: int = None
    labels: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise DataError(f"dataset {self.name!r} needs at least one row of a 2-D matrix")
        if len(self.feature_names) != self.features.shape[1]:
            raise DataError(
                f"dataset {self.name!r}: {len(self.feature_names)} names for {self.features.shape[1]} columns"
            )
        if not np.all(np.isfinite(self.features)):
            raise DataError(f"dataset {self.name!r} contains NaN or Inf")

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def subset(self, idx, name=None):
        labels = None if self.labels is None else self.labels[idx]
        return Dataset(name or self.name, self.features[idx], list(self.feature_names), self.seed, labels,
                       dict(self.meta))


def _side_rngs(seed):
    src, tgt = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(src), np.random.default_rng(tgt)


def _sk_seed(rng):
    return int(rng.integers(2**31 - 1))


def _pair(name, seed, xs, ys, params, xl=None, yl=None):
    names = ["x", "y"]
    meta = {"generator": name, "seed": seed, **params}
    return (
        Dataset(f"{name}_source", xs, names, seed, xl, meta),
        Dataset(f"{name}_target", ys, names, seed, yl, meta),
    )


def gen_bookshelf(n, seed=0, noise=0.001):
    """Two thin horizontal strips: x in [0, 1] (source) and x in [2, 3] (target)."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    rs, rt = _side_rngs(seed)
    xs = np.column_stack([rs.uniform(0.0, 1.0, n), rs.normal(0.0, noise, n)])
    ys = np.column_stack([rt.uniform(2.0, 3.0, n), rt.normal(0.0, noise, n)])
    return _pair("bookshelf", seed, xs, ys, {"n": n, "noise": noise})


def gen_circles(n, noise=0.02, seed=0, factor=0.5, source_scale=1.0, target_scale=2.0):
    """Concentric circle pairs; the target is the source shape scaled up.

    Labels: 0 for the outer ring (radius ``scale``), 1 for the inner ring
    (radius ``factor * scale``).
    """
    if n < 2 or n % 2:
        raise ConfigError(f"circles needs an even n >= 2, got {n}")
    if not target_scale > source_scale > 0:
        raise ConfigError("need target_scale > source_scale > 0")
    rs, rt = _side_rngs(seed)
    sides = []
    for rng, s in ((rs, source_scale), (rt, target_scale)):
        pts, lab = skd.make_circles(n, shuffle=True, noise=None, random_state=_sk_seed(rng), factor=factor)
        pts = pts * s
        if noise:
            pts = pts + rng.normal(0.0, noise, pts.shape)
        sides.append((pts, lab))
    params = {"n": n, "noise": noise, "factor": factor,
              "source_scale": source_scale, "target_scale": target_scale}
    return _pair("circles", seed, sides[0][0], sides[1][0], params, sides[0][1], sides[1][1])


def gen_swiss_roll(n, seed=0, noise=0.05, scale=0.1):
    """Standard 2-D Gaussian source; target is the (x, z) face of a swiss roll, scaled."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    rs, rt = _side_rngs(seed)
    xs = rs.standard_normal((n, 2))
    roll, _ = skd.make_swiss_roll(n, noise=noise, random_state=_sk_seed(rt))
    ys = roll[:, [0, 2]] * scale
    return _pair("swiss_roll", seed, xs, ys, {"n": n, "noise": noise, "scale": scale})


def gen_moons(n, noise=0.05, seed=0):
    """Upper moon as source, lower moon as target, ``n`` points each."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    rs, rt = _side_rngs(seed)
    sides = []
    for rng, label in ((rs, 0), (rt, 1)):
        counts = (n, 0) if label == 0 else (0, n)
        pts, _ = skd.make_moons(counts, shuffle=True, noise=None, random_state=_sk_seed(rng))
        if noise:
            pts = pts + rng.normal(0.0, noise, pts.shape)
        sides.append(pts)
    return _pair("moons", seed, sides[0], sides[1], {"n": n, "noise": noise},
                 np.zeros(n, dtype=int), np.ones(n, dtype=int))


def generate(name, n, seed=0, **kwargs):
    makers = {"bookshelf": gen_bookshelf, "circles": gen_circles,
              "swiss_roll": gen_swiss_roll, "moons": gen_moons}
    if name not in makers:
        raise ConfigError(f"unknown dataset {name!r}; choose from {', '.join(TOY_DATASETS)}")
    return makers[name](n, seed=seed, **kwargs)


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


def _check_names(names, path):
    for j, name in enumerate(names):
        if not _NAME_RE.match(name):
            raise DataError(f"{path}: column {j} name {name!r} must match [A-Za-z0-9_.-]+")


def load_csv(path, name=None):
    path = os.fspath(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    _check_names(header, path)
    body = [r for r in rows[1:] if r]
    if not body:
        raise DataError(f"{path}: header only, no data rows")
    d = len(header)
    values = np.empty((len(body), d))
    for i, row in enumerate(body, start=1):
        if len(row) != d:
            raise DataError(f"{path}: data row {i} has {len(row)} cells, header has {d}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {i}, column {j} ({header[j]}): {cell!r} is not a number") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: row {i}, column {j} ({header[j]}) is not finite")
            values[i - 1, j] = v
    stem = os.path.splitext(os.path.basename(path))[0]
    return Dataset(name or stem, values, header)


def write_csv(data, path, feature_names=None):
    """Write a Dataset or matrix with shortest round-trip float formatting (atomic)."""
    if isinstance(data, Dataset):
        values, names = data.features, feature_names or data.feature_names
    else:
        values = np.asarray(data, dtype=np.float64)
        names = feature_names or [f"f{j}" for j in range(values.shape[1])]
    _check_names(names, path)
    atomic_write(path, lambda fh: _write_rows(fh, names, values))


def _write_rows(fh, names, values):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(names)
    for row in values:
        w.writerow([repr(float(v)) for v in row])


def atomic_write(path, writer, mode="w"):
    """Write via a temporary file in the target directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        kwargs = {"newline": ""} if "b" not in mode else {}
        with os.fdopen(fd, mode, encoding=None if "b" in mode else "utf-8", **kwargs) as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------------------------
# Splits and standardisation
# --------------------------------------------------------------------------


def split(ds, test_fraction, seed=0):
    """Random disjoint train/test split; returns ``(train, test)``."""
    if not 0 < test_fraction < 1:
        raise ConfigError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n_test = int(round(ds.n * test_fraction))
    if n_test < 1 or n_test > ds.n - 1:
        raise DataError(f"cannot split {ds.n} rows with test_fraction={test_fraction}")
    order = np.random.default_rng(seed).permutation(ds.n)
    test_idx, train_idx = np.sort(order[:n_test]), np.sort(order[n_test:])
    return ds.subset(train_idx, f"{ds.name}_train"), ds.subset(test_idx, f"{ds.name}_test")


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    STD_FLOOR = 1e-8

    @classmethod
    def fit(cls, data):
        X = data.features if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
        return cls(X.mean(axis=0), np.maximum(X.std(axis=0), cls.STD_FLOOR))

    def transform(self, data):
        if isinstance(data, Dataset):
            out = data.subset(np.arange(data.n))
            out.features = (data.features - self.mean) / self.std
            return out
        return (np.asarray(data, dtype=np.float64) - self.mean) / self.std

    def inverse(self, X):
        return np.asarray(X, dtype=np.float64) * self.std + self.mean

    def as_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}


def standardize(train, *others):
    """Standardise ``train`` and any ``others`` with the train statistics.

    Returns ``(transformed_list, Standardizer)``; the list starts with the
    transformed train set.
    """
    scaler = Standardizer.fit(train)
    return [scaler.transform(d) for d in (train, *others)], scaler
