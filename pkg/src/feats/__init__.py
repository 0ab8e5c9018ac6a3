"""feats: interpretable feature engineering for time-series predictors with attention heads."""

__version__ = "0.1.0"

from .data import PanelDataset, load_panel_csv, load_uea_ts, save_panel_csv
from .datagen import GeneratorSpec, generate, oracle_binary
from .errors import (ConfigError, DataError, DimensionError, FeatsError, StateError,
                     StatisticsError, TrainingError, UnsupportedFeatureError, UnsupportedVersionError)
from .interpret import align_heads, component_distributions, extract_weights, variance_decomposition
from .layers import FeatureHead, GamRidge, HeadConfig, Subnet
from .metrics import metrics
from .model import FeatsModel, MLPModel, load_model, save_model
from .training import TrainConfig, ffnn_baseline, head_count_search, tau_grid_search, train

__all__ = [
    "PanelDataset", "load_panel_csv", "load_uea_ts", "save_panel_csv",
    "GeneratorSpec", "generate", "oracle_binary",
    "ConfigError", "DataError", "DimensionError", "FeatsError", "StateError", "StatisticsError",
    "TrainingError", "UnsupportedFeatureError", "UnsupportedVersionError",
    "align_heads", "component_distributions", "extract_weights", "variance_decomposition",
    "FeatureHead", "GamRidge", "HeadConfig", "Subnet",
    "metrics", "FeatsModel", "MLPModel", "load_model", "save_model",
    "TrainConfig", "ffnn_baseline", "head_count_search", "tau_grid_search", "train",
]
