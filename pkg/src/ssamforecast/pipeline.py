"""End-to-end workflow glue: split, scale, window, train, evaluate."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .evaluation import EvaluationReport, evaluate
from .lstm_ssam import ModelConfig, ModelParams
from .market_data import PriceSeries, SplitSeries, chronological_split
from .preprocess import ScalerParams, WindowedDataset, fit_scaler, make_test_windows, make_windows, scale
from .training import TrainConfig, train


@dataclass(frozen=True)
class DataConfig:
    feature: str = "Adj Close"
    ratio: float = 0.9
    fit_scaler_on: str = "train"  # or "all"

    def __post_init__(self):
        if self.fit_scaler_on not in ("train", "all"):
            raise ValueError(f"fit_scaler_on must be 'train' or 'all', got {self.fit_scaler_on!r}")


@dataclass
class PreparedData:
    split: SplitSeries
    scaler: ScalerParams
    train_windows: WindowedDataset
    test_windows: WindowedDataset


@dataclass
class RunResult:
    params: ModelParams
    scaler: ScalerParams
    loss_history: list[float]
    report: EvaluationReport
    elapsed: float
    prepared: PreparedData = field(repr=False)


def prepare(series: PriceSeries, data: DataConfig, time_step: int) -> PreparedData:
    split = chronological_split(series, data.ratio)
    scaler = fit_scaler(split.train if data.fit_scaler_on == "train" else series)
    train_scaled = scale(scaler, np.asarray(split.train.values))
    test_scaled = scale(scaler, np.asarray(split.test.values))
    if len(train_scaled) <= time_step:
        raise DataError(
            f"training partition has {len(train_scaled)} points; need more than time_step={time_step}"
        )
    return PreparedData(
        split=split,
        scaler=scaler,
        train_windows=make_windows(train_scaled, time_step),
        test_windows=make_test_windows(train_scaled, test_scaled, time_step),
    )


def run(series: PriceSeries, model: ModelConfig, training: TrainConfig, data: DataConfig = DataConfig(),
        on_epoch=None) -> RunResult:
    """Train on the leading partition and evaluate one-step-ahead on the rest.

    ``elapsed`` covers the train and evaluate stages only.
    """
    prepared = prepare(series, data, model.time_step)
    start = time.perf_counter()
    params, history = train(model, training, prepared.train_windows, on_epoch=on_epoch)
    report = evaluate(params, prepared.scaler, prepared.test_windows, prepared.split.test.dates)
    elapsed = time.perf_counter() - start
    return RunResult(params, prepared.scaler, history, report, elapsed, prepared)
