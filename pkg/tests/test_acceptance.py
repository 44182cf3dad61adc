"""End-to-end acceptance checks, one test per criterion.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary prints one
``criterion N: PASS|FAIL|SKIP`` line per criterion.  The market-data
replication check needs a Yahoo-layout CSV named by ``SSAM_SBIN_CSV``.
"""
import datetime as dt
import io
import math
import os
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssamforecast.baselines import random_walk_forecast, sma_forecast
from ssamforecast.evaluation import forecast_report, r2, rmse
from ssamforecast.lstm_ssam import ModelConfig, attention_forward, count_params, init_params
from ssamforecast.market_data import PriceSeries, read_csv, select_feature
from ssamforecast.model_store import ModelBundle, dumps, load, loads, save
from ssamforecast.pipeline import DataConfig, run
from ssamforecast.preprocess import make_windows
from ssamforecast.tensor import activation
from ssamforecast.training import TrainConfig, backward, finite_diff_grad, max_relative_error, train

criterion = pytest.mark.criterion


def _dates(n, start=dt.date(2015, 1, 1)):
    return [start + dt.timedelta(days=i) for i in range(n)]


@criterion("1", "analytic gradients match finite differences")
def test_gradient_oracle():
    start = time.perf_counter()
    worst = 0.0
    for seed in range(5):
        cfg = ModelConfig(input_dim=1, hidden_units=5, time_step=4, attention_dim=5, seed=seed)
        p = init_params(cfg)
        rng = np.random.default_rng(1000 + seed)
        x, y = rng.uniform(0, 1, (3, 4, 1)), rng.uniform(0, 1, 3)
        _, grads = backward(p, x, y)
        worst = max(worst, max_relative_error(grads, finite_diff_grad(p, x, y, eps=1e-5)))
    elapsed = time.perf_counter() - start
    print(f"max relative error {worst:.3g} in {elapsed:.2f}s")
    assert worst <= 1e-4
    assert elapsed < 10


@criterion("2", "parameter counts of the default model")
def test_parameter_counts():
    counts = count_params(ModelConfig())
    assert counts["lstm"] == 10400
    assert counts["dense"] == 501
    assert counts["attention"] == 3 * (50 * 50 + 50) == 7650


TABLE = [
    ("01-06-2021", 422.060, 414.115, 7.945, 1.882),
    ("02-06-2021", 426.548, 421.643, 4.904, 1.150),
    ("03-06-2021", 432.899, 425.945, 6.953, 1.606),
    ("04-06-2021", 426.942, 432.451, -5.510, 1.291),
    ("07-06-2021", 425.760, 427.028, -1.268, 0.298),
    ("08-06-2021", 420.591, 426.185, -5.595, 1.330),
    ("09-06-2021", 414.978, 421.085, -6.107, 1.472),
    ("23-05-2022", 453.872, 454.919, -1.047, 0.231),
    ("24-05-2022", 455.250, 452.759, 2.491, 0.547),
    ("25-05-2022", 454.200, 454.959, -0.759, 0.167),
    ("26-05-2022", 469.000, 453.817, 15.183, 3.237),
    ("27-05-2022", 469.000, 468.350, 0.650, 0.139),
    ("30-05-2022", 474.450, 467.755, 6.695, 1.411),
]


@criterion("3", "forecast error and percentage columns of the sample table")
def test_error_columns_reproduce_table():
    dates = [dt.datetime.strptime(d, "%d-%m-%Y").date() for d, *_ in TABLE]
    report = forecast_report(dates, [r[1] for r in TABLE], [r[2] for r in TABLE])
    # The printed inputs are themselves rounded to 3 decimals, so some
    # differences land exactly on the 0.001 boundary; 1e-9 absorbs binary
    # representation error only.
    tol = 0.001 + 1e-9
    for row, (_, _, _, err, pct) in zip(report.rows, TABLE):
        assert abs(row.forecast_error - err) <= tol, row
        assert abs(row.error_percent - pct) <= tol, row


@criterion("4", "rmse / r2 oracles and report consistency")
def test_metric_oracles():
    assert rmse([3.5, 7.0], [3.5, 7.0]) == 0.0
    assert abs(rmse([2, 2], [1, 3]) - 1.0) <= 1e-12
    assert abs(rmse([5], [2]) - 3.0) <= 1e-12
    assert abs(r2([1, 2, 3], [1, 2, 3]) - 1.0) <= 1e-12
    assert abs(r2([2, 2, 2], [1, 2, 3]) - 0.0) <= 1e-12
    assert abs(r2([1, 2, 5], [1, 2, 3]) - (-1.0)) <= 1e-12

    rng = np.random.default_rng(4)
    for _ in range(200):
        n = int(rng.integers(1, 60))
        actual = rng.uniform(50, 500, n)
        predicted = actual + rng.normal(0, rng.uniform(0.01, 20), n)
        report = forecast_report(_dates(n), actual, predicted)
        sq = math.fsum(r.forecast_error ** 2 for r in report.rows)
        assert abs(report.rmse ** 2 * n - sq) <= 1e-9 * sq


@criterion("5", "attention rows are distributions; single step returns activated V")
@given(st.integers(0, 2**32 - 1))
@settings(max_examples=1000, deadline=None, derandomize=True)
def test_attention_invariants(seed):
    rng = np.random.default_rng(seed)
    h, k, t = (int(v) for v in rng.integers(1, 9, 3))
    cfg = ModelConfig(hidden_units=h, attention_dim=k, time_step=t, seed=seed)
    p = init_params(cfg)
    for name in p:
        p.tensors[name] = rng.normal(0, rng.uniform(0.1, 3.0), p[name].shape)
    H = rng.uniform(-1, 1, (2, t, h))
    _, cache = attention_forward(p, H)
    assert np.all(np.abs(cache["P"].sum(axis=-1) - 1.0) <= 1e-12)

    one = ModelConfig(hidden_units=h, attention_dim=k, time_step=1)
    p1 = init_params(one)
    for name in p1:
        p1.tensors[name] = rng.normal(0, 1, p1[name].shape)
    H1 = rng.uniform(-1, 1, (1, 1, h))
    A1, _ = attention_forward(p1, H1)
    V = H1[0] @ p1["attention.W_V"] + p1["attention.b_V"]
    assert np.array_equal(A1[0], activation("relu", V))


@criterion("6", "overfits a tiny dataset deterministically")
def test_overfit_convergence():
    series = np.linspace(0.1, 0.9, 30)
    ds = make_windows(series, 10)
    assert len(ds) == 20
    cfg = ModelConfig(hidden_units=8, time_step=10, seed=0)
    tc = TrainConfig(epochs=500, batch_size=10, shuffle_seed=0)
    start = time.perf_counter()
    p1, h1 = train(cfg, tc, ds)
    elapsed = time.perf_counter() - start
    p2, h2 = train(cfg, tc, ds)
    print(f"final loss {h1[-1]:.3g} in {elapsed:.2f}s")
    assert h1[-1] < 1e-3
    assert h1 == h2
    assert all(p1[k].tobytes() == p2[k].tobytes() for k in p1)
    assert elapsed < 30


@criterion("7", "generalizes on a noiseless sine wave")
def test_sine_generalization():
    i = np.arange(500)
    series = PriceSeries(_dates(500), (100 + 20 * np.sin(2 * np.pi * i / 50)).tolist())
    cfg = ModelConfig(time_step=10, seed=42)
    tc = TrainConfig(epochs=50, batch_size=10, shuffle_seed=42)
    start = time.perf_counter()
    result = run(series, cfg, tc, DataConfig())
    elapsed = time.perf_counter() - start
    print(f"test {result.report.summary()} in {elapsed:.1f}s")
    assert result.report.r2 > 0.95
    assert elapsed < 120


@criterion("8", "market-data replication (needs SSAM_SBIN_CSV)")
@pytest.mark.slow
def test_market_replication():
    path = os.environ.get("SSAM_SBIN_CSV")
    if not path:
        pytest.skip("set SSAM_SBIN_CSV to a Yahoo-layout daily CSV to run this check")
    series = select_feature(read_csv(path), "Adj Close")
    start = time.perf_counter()
    good = wins = 0
    for seed in (0, 1, 2):
        tc = TrainConfig(shuffle_seed=seed)
        proposed = run(series, ModelConfig(seed=seed), tc).report
        plain = run(series, ModelConfig(seed=seed, attention=False), tc).report
        print(f"seed {seed}: proposed {proposed.summary()}  lstm50 {plain.summary()}")
        good += proposed.rmse < 20 and proposed.r2 > 0.85
        wins += proposed.rmse < plain.rmse
    elapsed = time.perf_counter() - start
    assert good >= 2
    assert wins >= 2
    assert elapsed < 15 * 60


@criterion("9", "seeded training and save/load are bit-exact")
def test_determinism_and_persistence(tmp_path):
    rng = np.random.default_rng(9)
    values = (150 + np.cumsum(rng.normal(0, 1, 80))).tolist()
    series = PriceSeries(_dates(80), values)
    cfg = ModelConfig(hidden_units=6, time_step=5, seed=13)
    tc = TrainConfig(epochs=3, batch_size=8, shuffle_seed=13)
    paths = []
    for name in ("a.ssam", "b.ssam"):
        res = run(series, cfg, tc)
        bundle = ModelBundle.from_params(res.params, res.scaler, train_config={"epochs": 3, "seed": 13}, data_config={"feature": "Adj Close"})
        save(bundle, tmp_path / name)
        paths.append(tmp_path / name)
    assert paths[0].read_bytes() == paths[1].read_bytes()

    loaded = load(paths[0])
    for k, v in res.params.tensors.items():
        assert loaded.tensors[k].tobytes() == v.tobytes()
    assert loaded.scaler == res.scaler
    assert dumps(loads(dumps(loaded))) == dumps(loaded)
    buf = io.StringIO()
    save(loaded, buf)
    assert buf.getvalue() == paths[0].read_text()


@criterion("10", "random walk equals SMA with n=1")
def test_random_walk_is_sma1():
    rng = np.random.default_rng(10)
    for _ in range(100):
        n_hist, n_test = (int(v) for v in rng.integers(1, 40, 2))
        vals = (100 * np.exp(np.cumsum(rng.normal(0, 0.02, n_hist + n_test)))).tolist()
        d = _dates(n_hist + n_test)
        hist = PriceSeries(d[:n_hist], vals[:n_hist])
        test = PriceSeries(d[n_hist:], vals[n_hist:])
        assert random_walk_forecast(hist, test).predicted == sma_forecast(hist, test, 1).predicted
