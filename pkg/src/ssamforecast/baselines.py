"""Deterministic reference forecasters: ARIMA(0,1,0) random walk and a rolling SMA."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DataError, InsufficientDataError
from .market_data import PriceSeries


@dataclass(frozen=True)
class BaselineForecast:
    name: str
    predicted: tuple[float, ...]


def random_walk_forecast(history: PriceSeries, test: PriceSeries) -> BaselineForecast:
    """Driftless ARIMA(0,1,0): each test day is predicted by the previous realized value."""
    if len(history.values) == 0:
        raise DataError("random walk needs a non-empty history")
    prev = (history.values[-1],) + tuple(test.values[:-1])
    return BaselineForecast("ARIMA(0,1,0)", prev)


def sma_forecast(history: PriceSeries, test: PriceSeries, n: int) -> BaselineForecast:
    """Predict each test day with the mean of the ``n`` realized values before it."""
    if n < 1:
        raise DataError(f"SMA period must be >= 1, got {n}")
    if len(history.values) < n:
        raise InsufficientDataError(f"SMA({n}) needs {n} history points, got {len(history.values)}")
    seen = list(history.values[-n:]) + list(test.values)
    preds = tuple(math.fsum(seen[i:i + n]) / n for i in range(len(test.values)))
    return BaselineForecast(f"SMA({n})", preds)
