"""DMRF: random forests whose splits are drawn by temperature softmax over impurity reductions, plus baseline variants."""
from .data import Dataset, SyntheticSpec, kfold, load_csv, synth_classification, synth_regression, write_csv
from .errors import ConfigError, DataError
from .forest import Forest, VariantConfig, load_forest, predict_class, predict_value, save_forest, train_forest

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "Dataset", "Forest", "SyntheticSpec", "VariantConfig",
    "kfold", "load_csv", "load_forest", "predict_class", "predict_value", "save_forest",
    "synth_classification", "synth_regression", "train_forest", "write_csv",
]
