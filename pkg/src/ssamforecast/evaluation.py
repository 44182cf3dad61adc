"""Forecast metrics (RMSE, R^2, forecast error and error percentage) and test-set evaluation."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError
from .lstm_ssam import ModelParams, predict
from .preprocess import ScalerParams, WindowedDataset, inverse_scale

REPORT_COLUMNS = ("date", "actual", "predicted", "forecast_error", "error_percent")


@dataclass(frozen=True)
class ForecastRow:
    date: object
    actual: float
    predicted: float
    forecast_error: float
    error_percent: float


@dataclass(frozen=True)
class EvaluationReport:
    rows: tuple[ForecastRow, ...]
    rmse: float
    r2: float

    def __len__(self) -> int:
        return len(self.rows)

    def summary(self) -> str:
        return f"rmse={self.rmse:.6g} r2={self.r2:.6g}"

    def to_csv(self, decimals: int | None = 3) -> str:
        """Table-style CSV; display values rounded to ``decimals`` (None keeps full precision)."""
        def fmt(v: float) -> str:
            return repr(float(v)) if decimals is None else f"{v:.{decimals}f}"

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            d = r.date.isoformat() if hasattr(r.date, "isoformat") else str(r.date)
            w.writerow([d, fmt(r.actual), fmt(r.predicted), fmt(r.forecast_error), fmt(r.error_percent)])
        return buf.getvalue()

    def predictions_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("date", "predicted"))
        for r in self.rows:
            d = r.date.isoformat() if hasattr(r.date, "isoformat") else str(r.date)
            w.writerow([d, repr(float(r.predicted))])
        return buf.getvalue()


def _pair(predicted, actual, min_len: int = 1) -> tuple[np.ndarray, np.ndarray]:
    f = np.asarray(predicted, dtype=float).ravel()
    o = np.asarray(actual, dtype=float).ravel()
    if f.size != o.size:
        raise ValueError(f"length mismatch: {f.size} predicted vs {o.size} actual")
    if f.size < min_len:
        raise ValueError(f"need at least {min_len} pairs, got {f.size}")
    return f, o


def rmse(predicted, actual) -> float:
    f, o = _pair(predicted, actual)
    return math.sqrt(math.fsum((f - o) ** 2) / f.size)


def r2(predicted, actual) -> float:
    """Coefficient of determination ``1 - SS_res / SS_tot``; negative when worse than the mean."""
    f, o = _pair(predicted, actual, min_len=2)
    ss_tot = math.fsum((o - o.mean()) ** 2)
    if ss_tot == 0.0:
        raise ValueError("actual values have zero variance; R^2 is undefined")
    return 1.0 - math.fsum((o - f) ** 2) / ss_tot


def forecast_error(actual: float, predicted: float) -> float:
    return actual - predicted


def error_percent(actual: float, predicted: float) -> float:
    if actual == 0:
        raise ZeroDivisionError("error percentage undefined for a zero actual price")
    return abs((actual - predicted) / actual) * 100.0


def forecast_report(dates: Sequence, actual, predicted) -> EvaluationReport:
    a = np.asarray(actual, dtype=float).ravel()
    p = np.asarray(predicted, dtype=float).ravel()
    if not (len(dates) == a.size == p.size):
        raise ValueError(f"length mismatch: {len(dates)} dates, {a.size} actual, {p.size} predicted")
    rows = []
    for d, av, pv in zip(dates, a, p):
        if av == 0:
            raise DataError(f"actual price is zero on {d}; error percentage undefined")
        rows.append(ForecastRow(d, float(av), float(pv), forecast_error(av, pv), error_percent(av, pv)))
    score = r2(p, a) if a.size >= 2 and np.ptp(a) > 0 else float("nan")
    return EvaluationReport(rows=tuple(rows), rmse=rmse(p, a), r2=score)


def evaluate(params: ModelParams, scaler: ScalerParams, test_windows: WindowedDataset, dates: Sequence) -> EvaluationReport:
    """One-step-ahead predictions for every test window, reported in price units."""
    if len(dates) != len(test_windows):
        raise ValueError(f"{len(test_windows)} test windows but {len(dates)} dates")
    scaled_pred = predict(params, test_windows.as_model_input())
    predicted = inverse_scale(scaler, scaled_pred)
    actual = inverse_scale(scaler, np.asarray(test_windows.targets))
    return forecast_report(dates, actual, predicted)
