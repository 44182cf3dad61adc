"""Loading and partitioning of daily OHLCV histories in the Yahoo Finance CSV layout."""
from __future__ import annotations

import csv
import io
import math
from decimal import Decimal
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError, EmptyInputError, FormatError, RowError

HEADER = ("Date", "Open", "High", "Low", "Close", "Adj Close", "Volume")
PRICE_FIELDS = ("Open", "High", "Low", "Close", "Adj Close")
NUMERIC_FIELDS = PRICE_FIELDS + ("Volume",)

_ATTR = {
    "Open": "open",
    "High": "high",
    "Low": "low",
    "Close": "close",
    "Adj Close": "adj_close",
    "Volume": "volume",
}


@dataclass(frozen=True)
class OhlcvRecord:
    date: date
    open: float
    high: float
    low: float
    close: float
    adj_close: float
    volume: int

    def value(self, field: str) -> float:
        try:
            return float(getattr(self, _ATTR[field]))
        except KeyError:
            raise DataError(
                f"unknown field {field!r}; expected one of {', '.join(NUMERIC_FIELDS)}"
            ) from None


@dataclass(frozen=True)
class PriceSeries:
    dates: tuple[date, ...]
    values: tuple[float, ...]
    feature_name: str = "Adj Close"

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.dates) != len(self.values):
            raise DataError(
                f"dates ({len(self.dates)}) and values ({len(self.values)}) differ in length"
            )
        if not self.values:
            raise EmptyInputError("price series is empty")
        for prev, cur in zip(self.dates, self.dates[1:]):
            if cur <= prev:
                raise DataError(f"dates not strictly increasing: {prev} then {cur}")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SplitSeries:
    train: PriceSeries
    test: PriceSeries
    ratio: float


def _check_record(rec: OhlcvRecord, line: int) -> None:
    for name in PRICE_FIELDS:
        v = rec.value(name)
        if not math.isfinite(v) or v <= 0:
            raise RowError(line, f"{name} must be finite and positive, got {v!r}")
    if rec.volume < 0:
        raise RowError(line, f"negative volume {rec.volume}")
    if rec.low > min(rec.open, rec.close):
        raise RowError(line, f"Low {rec.low} exceeds min(Open, Close)")
    if rec.high < max(rec.open, rec.close):
        raise RowError(line, f"High {rec.high} is below max(Open, Close)")


def _parse_volume(text: str) -> int:
    # Some exports write volume as "2968820.0"
    try:
        return int(text)
    except ValueError:
        v = float(text)
        if not v.is_integer():
            raise
        return int(v)


def parse_csv(text: str | Iterable[str]) -> list[OhlcvRecord]:
    """Parse Yahoo-format CSV text into validated records, in file order.

    Accepts either the whole document as a string or an iterable of lines.
    LF and CRLF line endings are both accepted. Rows are never dropped: the
    first bad row aborts parsing with a :class:`RowError` carrying its line.
    """
    if isinstance(text, str):
        text = io.StringIO(text, newline="")
    reader = csv.reader(text)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInputError("input is empty") from None
    header = [h.strip().lstrip("﻿") for h in header]
    if tuple(header) != HEADER:
        raise FormatError(f"expected header {','.join(HEADER)!r}, got {','.join(header)!r}")

    records = []
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(HEADER):
            raise RowError(line, f"expected {len(HEADER)} fields, got {len(row)}")
        cells = [c.strip() for c in row]
        try:
            day = date.fromisoformat(cells[0])
        except ValueError:
            raise RowError(line, f"unparseable date {cells[0]!r}") from None
        try:
            prices = [float(c) for c in cells[1:6]]
            volume = _parse_volume(cells[6])
        except ValueError as exc:
            raise RowError(line, f"unparseable number ({exc})") from None
        rec = OhlcvRecord(day, *prices, volume)
        _check_record(rec, line)
        records.append(rec)

    if not records:
        raise EmptyInputError("CSV has a header but no data rows")
    return records


def read_csv(path: str | Path) -> list[OhlcvRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_csv(fh)


def format_csv(records: Sequence[OhlcvRecord]) -> str:
    """Serialize records back to the Yahoo layout (shortest round-trip decimals)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for r in records:
        writer.writerow(
            [r.date.isoformat(), repr(r.open), repr(r.high), repr(r.low),
             repr(r.close), repr(r.adj_close), str(r.volume)]
        )
    return buf.getvalue()


def select_feature(records: Sequence[OhlcvRecord], field: str = "Adj Close") -> PriceSeries:
    if field not in _ATTR:
        raise DataError(f"unknown field {field!r}; expected one of {', '.join(NUMERIC_FIELDS)}")
    if not records:
        raise EmptyInputError("no records to select from")
    return PriceSeries(
        dates=tuple(r.date for r in records),
        values=tuple(r.value(field) for r in records),
        feature_name=field,
    )


def chronological_split(series: PriceSeries, ratio: float = 0.9) -> SplitSeries:
    """Split into a leading training span and trailing test span, no shuffling."""
    if not 0.0 < ratio < 1.0:
        raise DataError(f"split ratio must lie in (0, 1), got {ratio}")
    n = len(series)
    # decimal product so that e.g. 0.29 * 100 floors to 29, not 28
    n_train = math.floor(Decimal(repr(float(ratio))) * n)
    if n_train == 0 or n_train == n:
        raise DataError(
            f"ratio {ratio} on {n} observations leaves an empty "
            f"{'train' if n_train == 0 else 'test'} partition"
        )
    name = series.feature_name
    return SplitSeries(
        train=PriceSeries(series.dates[:n_train], series.values[:n_train], name),
        test=PriceSeries(series.dates[n_train:], series.values[n_train:], name),
        ratio=ratio,
    )
