"""Run configuration and the JSON checkpoint format."""

import dataclasses
import json
import os

import numpy as np

from .datasets import atomic_write
from .dual import DualTrainConfig, NetworkConfig
from .errors import ConfigError, DataError
from .lipschitz import PotentialNet
from .autodiff import Tensor
from .metrics import DEFAULT_COS_TOL, DEFAULT_MMD_SCALES
from .stepsize import DIRECTION_FLOOR, Discriminator, GanTrainConfig, StepSizeNet, TransportMap

FORMAT_VERSION = 1


@dataclasses.dataclass
class MetricsConfig:
    mmd_scales: tuple = DEFAULT_MMD_SCALES
    monotonicity_pairs: int = 10000
    cos_tol: float = DEFAULT_COS_TOL

    def validate(self):
        self.mmd_scales = tuple(float(s) for s in self.mmd_scales)
        if not self.mmd_scales or any(s <= 0 for s in self.mmd_scales):
            raise ConfigError("metrics.mmd_scales must be a non-empty list of positive numbers")
        if self.monotonicity_pairs < 1:
            raise ConfigError("metrics.monotonicity_pairs must be >= 1")
        if not -1.0 <= self.cos_tol < 0.0:
            raise ConfigError("metrics.cos_tol must lie in [-1, 0)")
        return self


def _build(cls, section, data):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"config section {section!r} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {section!r}: {', '.join(unknown)}")
    return cls(**data)


@dataclasses.dataclass
class RunConfig:
    """Everything ``fit`` needs.  ``seed``, when set, overrides the per-stage seeds."""

    dual: DualTrainConfig = dataclasses.field(default_factory=DualTrainConfig)
    gan: GanTrainConfig = dataclasses.field(default_factory=GanTrainConfig)
    network: NetworkConfig = dataclasses.field(default_factory=NetworkConfig)
    metrics: MetricsConfig = dataclasses.field(default_factory=MetricsConfig)
    seed: int = 0

    SECTIONS = {"dual": DualTrainConfig, "gan": GanTrainConfig, "network": NetworkConfig,
                "metrics": MetricsConfig}

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(data) - set(cls.SECTIONS) - {"seed"})
        if unknown:
            raise ConfigError(f"unknown top-level config key(s): {', '.join(unknown)}")
        seed = data.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
        sections = {name: _build(kind, name, data.get(name)) for name, kind in cls.SECTIONS.items()}
        # the top-level seed drives both stages unless a stage pins its own
        for name in ("dual", "gan"):
            if "seed" not in (data.get(name) or {}):
                sections[name].seed = seed
        return cls(seed=seed, **sections).validate()

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    def validate(self):
        try:
            for name in self.SECTIONS:
                getattr(self, name).validate()
        except TypeError as exc:
            raise ConfigError(f"config value of the wrong type: {exc}") from None
        # fail before training: the potential constructor checks group/width compatibility
        PotentialNet(1, self.network.hidden, self.network.group_size, self.network.method,
                     self.network.bjorck_iters, self.network.bjorck_beta)
        return self

    def as_dict(self):
        out = dataclasses.asdict(self)
        for section in out.values():
            if isinstance(section, dict):
                for k, v in section.items():
                    if isinstance(v, tuple):
                        section[k] = list(v)
        return out


# --------------------------------------------------------------------------
# Checkpoints
# --------------------------------------------------------------------------


def _potential_state(f):
    return {
        "in_dim": f.in_dim,
        "hidden": list(f.hidden),
        "group_size": f.group_size,
        "method": f.method,
        "bjorck_iters": f.bjorck_iters,
        "bjorck_beta": f.bjorck_beta,
        "layers": [
            {"in": l.d_in, "out": l.d_out, "method": l.method,
             "raw_weight": l.raw_weight.values.ravel().tolist(), "bias": l.bias.values.ravel().tolist()}
            for l in f.layers
        ],
    }


def _potential_from_state(s):
    f = PotentialNet(s["in_dim"], s["hidden"], s["group_size"], s["method"], s["bjorck_iters"],
                     s["bjorck_beta"], seed=0)
    if len(s["layers"]) != len(f.layers):
        raise DataError("checkpoint potential has the wrong number of layers")
    for layer, ls in zip(f.layers, s["layers"]):
        if (ls["in"], ls["out"]) != (layer.d_in, layer.d_out):
            raise DataError(f"checkpoint layer shape {ls['in']}x{ls['out']} does not fit the architecture")
        layer.raw_weight = Tensor(np.reshape(ls["raw_weight"], (layer.d_out, layer.d_in)), requires_grad=True)
        layer.bias = Tensor(np.reshape(ls["bias"], (1, layer.d_out)), requires_grad=True)
    return f


def checkpoint_dict(tmap, run_config=None):
    run_config = run_config or RunConfig()
    summary = {}
    if tmap.dual_history is not None and len(tmap.dual_history):
        summary["final_dual"] = tmap.dual_history.final_dual
    if tmap.gan_history is not None and len(tmap.gan_history):
        summary["final_gen_loss"] = tmap.gan_history.gen_loss[-1]
        summary["final_disc_loss"] = tmap.gan_history.disc_loss[-1]
    return {
        "format_version": FORMAT_VERSION,
        "run_config": run_config.as_dict(),
        "potential": _potential_state(tmap.potential),
        "stepsize_net": tmap.stepsize.state(),
        "discriminator": None if tmap.discriminator is None else tmap.discriminator.state(),
        "direction_floor": tmap.direction_floor,
        "summary": summary,
        "seed": run_config.seed,
    }


def save_checkpoint(tmap, path, run_config=None):
    """Atomic JSON write; floats round-trip exactly through ``repr``."""
    text = json.dumps(checkpoint_dict(tmap, run_config), indent=1)
    atomic_write(path, lambda fh: fh.write(text + "\n"))


def load_checkpoint(path):
    """Returns ``(TransportMap, RunConfig, summary)``."""
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a valid checkpoint ({exc})") from None
    version = data.get("format_version") if isinstance(data, dict) else None
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint format_version {version!r}")
    try:
        f = _potential_from_state(data["potential"])
        eta = StepSizeNet.from_state(data["stepsize_net"])
        disc = data.get("discriminator")
        D = Discriminator.from_state(disc) if disc else None
        cfg = RunConfig.from_dict(data["run_config"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (ConfigError, DataError)):
            raise
        raise DataError(f"{path}: malformed checkpoint ({exc!r})") from None
    tmap = TransportMap(f, eta, data.get("direction_floor", DIRECTION_FLOOR), discriminator=D)
    return tmap, cfg, data.get("summary", {})
