"""Disentangled graph representation learning toolkit.

Micro-level component-specific neighbor aggregation, an adversarial
regularizer separating the component distributions, and progressive
diversity-preserving graph refinement, with a training loop and an
evaluation kit.
"""

__version__ = "0.1.0"

from .config import ConfigError, TrainConfig, load_config, parse_config
from .graph import DataError, Graph, load_dataset, save_dataset
from .numerics import NumericError
from .trainer import TrainResult, ablation_matrix, train

__all__ = [
    "ConfigError",
    "DataError",
    "Graph",
    "NumericError",
    "TrainConfig",
    "TrainResult",
    "ablation_matrix",
    "load_config",
    "load_dataset",
    "parse_config",
    "save_dataset",
    "train",
    "__version__",
]
