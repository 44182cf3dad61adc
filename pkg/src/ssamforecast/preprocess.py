"""Min-max scaling and sliding-window dataset construction."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateScalerError, EmptyInputError, InsufficientDataError
from .market_data import PriceSeries

DEFAULT_TIME_STEP = 10


@dataclass(frozen=True)
class ScalerParams:
    min: float
    max: float

    def __post_init__(self):
        if not (np.isfinite(self.min) and np.isfinite(self.max)):
            raise DegenerateScalerError(f"non-finite scaler bounds ({self.min}, {self.max})")
        if not self.max > self.min:
            raise DegenerateScalerError(
                f"scaler needs max > min, got min={self.min} max={self.max}"
            )

    @property
    def span(self) -> float:
        return self.max - self.min


@dataclass(frozen=True)
class WindowedDataset:
    """Supervised pairs: ``inputs[i]`` is a length-T window, ``targets[i]`` the next value."""

    inputs: np.ndarray  # (n, T)
    targets: np.ndarray  # (n,)
    time_step: int

    def __len__(self) -> int:
        return len(self.targets)

    def as_model_input(self) -> np.ndarray:
        """Windows shaped (n, T, 1) for a single-feature model."""
        return self.inputs[:, :, None]


def fit_scaler(series: PriceSeries | Sequence[float]) -> ScalerParams:
    values = series.values if isinstance(series, PriceSeries) else series
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise EmptyInputError("cannot fit a scaler on an empty series")
    return ScalerParams(float(arr.min()), float(arr.max()))


def scale(scaler: ScalerParams, x):
    """Map ``x`` to ``(x - min) / (max - min)``; values outside the fitted range leave [0, 1]."""
    if isinstance(x, (list, tuple)):
        x = np.asarray(x, dtype=float)
    return (x - scaler.min) / scaler.span


def inverse_scale(scaler: ScalerParams, x_star):
    if isinstance(x_star, (list, tuple)):
        x_star = np.asarray(x_star, dtype=float)
    return x_star * scaler.span + scaler.min


def make_windows(series: Sequence[float], time_step: int = DEFAULT_TIME_STEP) -> WindowedDataset:
    arr = np.asarray(series, dtype=float)
    if time_step < 1:
        raise ValueError(f"time_step must be >= 1, got {time_step}")
    if arr.ndim != 1 or len(arr) <= time_step:
        raise InsufficientDataError(
            f"need more than {time_step} values to build windows, got {len(arr)}"
        )
    n = len(arr) - time_step
    inputs = np.lib.stride_tricks.sliding_window_view(arr, time_step)[:n].copy()
    return WindowedDataset(inputs=inputs, targets=arr[time_step:].copy(), time_step=time_step)


def make_test_windows(
    train_scaled: Sequence[float], test_scaled: Sequence[float], time_step: int
) -> WindowedDataset:
    """Windows whose targets are exactly the test points.

    The last ``time_step`` training values seed the first window, so every
    test date gets a one-step-ahead prediction.
    """
    train_arr = np.asarray(train_scaled, dtype=float)
    if len(train_arr) < time_step:
        raise InsufficientDataError(
            f"training span ({len(train_arr)}) shorter than time_step ({time_step})"
        )
    seeded = np.concatenate([train_arr[len(train_arr) - time_step:], np.asarray(test_scaled, dtype=float)])
    return make_windows(seeded, time_step)
