"""Wasserstein-1 neural optimal transport: a 1-Lipschitz Kantorovich potential
gives the transport direction, an adversarially trained step-size network the
distance travelled."""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, NumericalError, ShapeError, UsageError, W1OTError
from .autodiff import Tensor, backward, grad_check
from .lipschitz import PotentialNet, lipschitz_audit, orthonormality_defect
from .dual import DualTrainConfig, NetworkConfig, TrainHistory, train_potential
from .stepsize import GanTrainConfig, TransportMap, fit_w1ot, train_stepsize
from .metrics import MetricsReport, evaluate, mmd_rbf
from .oracle import w1_1d, w1_matching
from .datasets import Dataset, generate, load_csv, write_csv
from .config import RunConfig, load_checkpoint, save_checkpoint

__all__ = [
    "ConfigError", "DataError", "NumericalError", "ShapeError", "UsageError", "W1OTError",
    "Tensor", "backward", "grad_check",
    "PotentialNet", "lipschitz_audit", "orthonormality_defect",
    "DualTrainConfig", "NetworkConfig", "TrainHistory", "train_potential",
    "GanTrainConfig", "TransportMap", "fit_w1ot", "train_stepsize",
    "MetricsReport", "evaluate", "mmd_rbf",
    "w1_1d", "w1_matching",
    "Dataset", "generate", "load_csv", "write_csv",
    "RunConfig", "load_checkpoint", "save_checkpoint",
]
