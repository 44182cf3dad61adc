import datetime as dt

import numpy as np
import pytest

from ssamforecast.market_data import HEADER

_criteria: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        outcome = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        _criteria[marker[0]] = (outcome, marker[1])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep.criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria, key=lambda k: int(k)):
        outcome, title = _criteria[num]
        terminalreporter.write_line(f"criterion {num:>2}: {outcome}  {title}")


def synthetic_ohlcv(n_rows: int, seed: int = 0, start=dt.date(2012, 5, 2)) -> str:
    """Yahoo-layout CSV of a geometric random walk on weekdays."""
    rng = np.random.default_rng(seed)
    lines = [",".join(HEADER)]
    day = start
    price = 200.0
    while len(lines) <= n_rows:
        if day.weekday() < 5:
            close = price * (1 + rng.normal(0, 0.01))
            hi = max(price, close) * (1 + abs(rng.normal(0, 0.003)))
            lo = min(price, close) * (1 - abs(rng.normal(0, 0.003)))
            lines.append(
                f"{day.isoformat()},{price:.6f},{hi:.6f},{lo:.6f},{close:.6f},"
                f"{close * 0.9:.6f},{int(rng.integers(1_000_000, 5_000_000))}"
            )
            price = close
        day += dt.timedelta(days=1)
    return "\n".join(lines) + "\n"


@pytest.fixture
def csv_factory(tmp_path):
    def make(n_rows=40, seed=0, name="prices.csv"):
        path = tmp_path / name
        path.write_text(synthetic_ohlcv(n_rows, seed), encoding="utf-8")
        return path

    return make
