"""Classification forests whose split nodes learn nuclear-norm transformations."""

from .data import DenseDataset, SubspaceSpec
from .dictionary import DictConfig, Dictionary
from .errors import (
    ConfigError,
    DimensionMismatch,
    IoError,
    NumericError,
    ParseError,
    TransforestError,
)
from .forest import Forest, TrainConfig, Tree, forest_predict, forest_train
from .model_io import load_forest, save_forest
from .transform import LearnConfig, learn_transform

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DenseDataset",
    "DictConfig",
    "Dictionary",
    "DimensionMismatch",
    "Forest",
    "IoError",
    "LearnConfig",
    "NumericError",
    "ParseError",
    "SubspaceSpec",
    "TrainConfig",
    "TransforestError",
    "Tree",
    "forest_predict",
    "forest_train",
    "learn_transform",
    "load_forest",
    "save_forest",
    "__version__",
]
