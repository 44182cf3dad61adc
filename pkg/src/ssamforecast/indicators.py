"""Simple moving averages and Pearson correlation matrices for exploratory analysis."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class SmaSeries:
    window_n: int
    dates: tuple
    values: np.ndarray


@dataclass(frozen=True)
class CorrelationMatrix:
    labels: tuple[str, ...]
    entries: np.ndarray

    def __getitem__(self, key: tuple[str, str]) -> float:
        a, b = key
        return float(self.entries[self.labels.index(a), self.labels.index(b)])


def sma(series: Sequence[float], n: int, dates: Sequence | None = None) -> SmaSeries:
    """Trailing mean over ``n`` points, emitted only where the window is full.

    Position ``i`` of the result is the mean of ``series[i:i + n]``; when
    ``dates`` are given, the result is labelled with the date of the last
    point in each window.
    """
    arr = np.asarray(series, dtype=float)
    if not 1 <= n <= len(arr):
        raise DataError(f"SMA period must be in [1, {len(arr)}], got {n}")
    # exact per-window sums; a running cumsum drifts on long series
    values = np.array([math.fsum(arr[i:i + n]) / n for i in range(len(arr) - n + 1)])
    out_dates = tuple(dates[n - 1:]) if dates is not None else tuple(range(n - 1, len(arr)))
    return SmaSeries(window_n=n, dates=out_dates, values=values)


def best_sma_window(series: Sequence[float], candidates: Sequence[int] = (10, 20, 50)) -> tuple[int, dict[int, float]]:
    """Pick the SMA period whose curve tracks the prices with the lowest RMSE.

    Each candidate is compared against the price on the date its window ends.
    Ties go to the smaller period.
    """
    from .evaluation import rmse

    arr = np.asarray(series, dtype=float)
    scores = {}
    for n in sorted(set(candidates)):
        s = sma(arr, n)
        scores[n] = rmse(s.values, arr[n - 1:])
    best = min(scores, key=lambda n: (scores[n], n))
    return best, scores


def pearson_correlation(columns: Mapping[str, Sequence[float]]) -> CorrelationMatrix:
    labels = tuple(columns)
    if not labels:
        raise DataError("no columns given")
    data = [np.asarray(columns[k], dtype=float) for k in labels]
    length = len(data[0])
    if length < 2:
        raise DataError("correlation needs at least 2 observations per column")
    for name, col in zip(labels, data):
        if len(col) != length:
            raise DataError(f"column {name!r} has length {len(col)}, expected {length}")

    centered = []
    for name, col in zip(labels, data):
        c = col - col.mean()
        if not np.any(c):
            raise DataError(f"column {name!r} has zero variance")
        # unit max-norm keeps tiny deviations from underflowing when squared
        centered.append(c / np.abs(c).max())
    m = np.vstack(centered)
    # (L-1) factors cancel between covariance and the standard deviations
    cov = m @ m.T
    sd = np.sqrt(np.diag(cov))
    entries = np.clip(cov / np.outer(sd, sd), -1.0, 1.0)
    entries = (entries + entries.T) / 2
    np.fill_diagonal(entries, 1.0)
    return CorrelationMatrix(labels=labels, entries=entries)
