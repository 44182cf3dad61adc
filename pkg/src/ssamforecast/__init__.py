"""One-step-ahead stock price forecasting with an LSTM + sequential self-attention model."""

__version__ = "0.1.0"

from .lstm_ssam import ModelConfig, ModelParams, count_params, init_params, model_forward
from .market_data import PriceSeries, chronological_split, parse_csv, read_csv, select_feature
from .preprocess import ScalerParams, fit_scaler, inverse_scale, make_windows, scale
from .training import AdamHyper, TrainConfig, train

__all__ = [
    "AdamHyper",
    "ModelConfig",
    "ModelParams",
    "PriceSeries",
    "ScalerParams",
    "TrainConfig",
    "chronological_split",
    "count_params",
    "fit_scaler",
    "init_params",
    "inverse_scale",
    "make_windows",
    "model_forward",
    "parse_csv",
    "read_csv",
    "scale",
    "select_feature",
    "train",
]
