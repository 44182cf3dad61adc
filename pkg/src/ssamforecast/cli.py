"""Command-line entry point: train, evaluate, predict, compare, indicators, replay.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Tabular output goes to the named path or stdout; logs go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import random_walk_forecast, sma_forecast
from .errors import DataError, ForecastError, ModelStoreError, NumericalError, ShapeError
from .evaluation import evaluate, forecast_report
from .indicators import best_sma_window, pearson_correlation, sma
from .lstm_ssam import ModelConfig, predict
from .market_data import NUMERIC_FIELDS, PriceSeries, chronological_split, read_csv, select_feature
from .model_store import ModelBundle, load, save
from .pipeline import DataConfig, prepare, run
from .preprocess import make_test_windows, scale
from .training import AdamHyper, TrainConfig

log = logging.getLogger("ssamforecast")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

NOT_IMPLEMENTED = ("CNN+BiLSTM", "LSTM+CNN", "FB_Prophet")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--feature", default="Adj Close", choices=NUMERIC_FIELDS)
    p.add_argument("--ratio", type=float, default=0.9, help="training fraction (default 0.9)")
    p.add_argument("--time-step", type=int, default=10)
    p.add_argument("--hidden", type=int, default=50)
    p.add_argument("--attention-dim", type=int, default=None, help="defaults to --hidden")
    p.add_argument("--activation", default="relu", choices=("relu", "linear", "tanh", "sigmoid"),
                   help="applied to the attention output")
    p.add_argument("--batch", type=int, default=10)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=0, help="seeds both initialization and shuffling")
    p.add_argument("--fit-scaler-on", choices=("train", "all"), default="train")
    p.add_argument("--no-shuffle", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ssamforecast", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-q", "--quiet", action="store_true", help="suppress progress logs")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="fit a model on the training partition and save it")
    p.add_argument("csv")
    p.add_argument("-o", "--output", required=True, help="model file (.ssam)")
    _add_model_flags(p)
    p.add_argument("--no-attention", action="store_true", help="plain LSTM -> flatten -> dense")
    p.add_argument("--loss-history", help="write epoch,loss CSV here")
    p.add_argument("--manifest", help="write the run manifest JSON here")

    p = sub.add_parser("evaluate", help="one-step-ahead test-set report")
    p.add_argument("model")
    p.add_argument("csv")
    p.add_argument("-o", "--output", help="report CSV (default stdout)")
    p.add_argument("--predictions", help="also write a date,predicted CSV here")
    p.add_argument("--decimals", type=int, default=3, help="display rounding in the report")
    p.add_argument("--manifest")

    p = sub.add_parser("predict", help="forecast the next value after the last row of a CSV")
    p.add_argument("model")
    p.add_argument("csv")
    p.add_argument("-o", "--output")

    p = sub.add_parser("compare", help="comparison table: LSTM variants, proposed model, baselines")
    p.add_argument("csv")
    p.add_argument("-o", "--output")
    _add_model_flags(p)
    p.add_argument("--sma-window", type=int, default=None,
                   help="SMA baseline period (default: best of 10/20/50 by RMSE on training data)")
    p.add_argument("--manifest")

    p = sub.add_parser("indicators", help="SMA columns and correlation matrix as CSV")
    p.add_argument("csv")
    p.add_argument("--feature", default="Adj Close", choices=NUMERIC_FIELDS)
    p.add_argument("--sma", default="10,20,50", help="comma-separated periods")
    p.add_argument("-o", "--output", help="SMA CSV (default stdout)")
    p.add_argument("--corr", help="correlation matrix CSV (default stdout, after the SMA table)")

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", help="override the output path recorded in the manifest")
    return parser


def _sha256(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load_series(path: str, feature: str) -> PriceSeries:
    return select_feature(read_csv(path), feature)


def _configs(args) -> tuple[ModelConfig, TrainConfig, DataConfig]:
    model = ModelConfig(
        hidden_units=args.hidden,
        time_step=args.time_step,
        attention_dim=args.attention_dim,
        post_attention_activation=args.activation,
        attention=not getattr(args, "no_attention", False),
        seed=args.seed,
    )
    training = TrainConfig(
        batch_size=args.batch,
        epochs=args.epochs,
        shuffle_seed=args.seed,
        shuffle=not args.no_shuffle,
        hyper=AdamHyper(alpha=args.lr),
    )
    data = DataConfig(feature=args.feature, ratio=args.ratio, fit_scaler_on=args.fit_scaler_on)
    return model, training, data


def _resolved_argv(args, skip=("command", "quiet", "manifest", "func")) -> list[str]:
    """Rebuild a fully explicit argv (every default spelled out) for replay."""
    argv = [args.command]
    positional = {"train": ["csv"], "evaluate": ["model", "csv"], "compare": ["csv"]}[args.command]
    argv += [getattr(args, k) for k in positional]
    for key, value in sorted(vars(args).items()):
        if key in skip or key in positional or value is None:
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        else:
            argv += [flag, str(value)]
    return argv


def _write_manifest(args, started: datetime, elapsed: float, extra: dict) -> dict:
    manifest = {
        "command": args.command,
        "argv": _resolved_argv(args),
        "version": __version__,
        "started": started.isoformat(),
        "elapsed_seconds": elapsed,
        **extra,
    }
    text = json.dumps(manifest, indent=2, sort_keys=True, default=str)
    if args.manifest:
        Path(args.manifest).write_text(text + "\n", encoding="utf-8")
    return manifest


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_train(args) -> int:
    started = datetime.now(timezone.utc)
    model_cfg, train_cfg, data_cfg = _configs(args)
    series = _load_series(args.csv, data_cfg.feature)

    def progress(epoch, loss, elapsed):
        if not args.quiet:
            print(f"epoch {epoch}/{train_cfg.epochs} loss={loss:.6g} elapsed={elapsed:.2f}s", file=sys.stderr)

    result = run(series, model_cfg, train_cfg, data_cfg, on_epoch=progress)
    split = result.prepared.split
    data_meta = {
        "feature": data_cfg.feature,
        "ratio": repr(data_cfg.ratio),
        "fit_scaler_on": data_cfg.fit_scaler_on,
        "rows": len(series),
        "first_date": series.dates[0].isoformat(),
        "last_date": series.dates[-1].isoformat(),
        "train_rows": len(split.train),
        "csv_sha256": _sha256(args.csv),
    }
    train_meta = {
        "batch_size": train_cfg.batch_size,
        "epochs": train_cfg.epochs,
        "shuffle": str(train_cfg.shuffle).lower(),
        "shuffle_seed": train_cfg.shuffle_seed,
        "alpha": repr(train_cfg.hyper.alpha),
        "beta1": repr(train_cfg.hyper.beta1),
        "beta2": repr(train_cfg.hyper.beta2),
        "epsilon": repr(train_cfg.hyper.epsilon),
        "final_loss": repr(result.loss_history[-1]),
    }
    bundle = ModelBundle.from_params(result.params, result.scaler, train_meta, data_meta)
    save(bundle, args.output)
    if args.loss_history:
        lines = ["epoch,loss"] + [f"{i},{loss!r}" for i, loss in enumerate(result.loss_history, 1)]
        Path(args.loss_history).write_text("\n".join(lines) + "\n", encoding="utf-8")
    manifest = _write_manifest(args, started, result.elapsed, {
        "inputs": {"csv": args.csv, "csv_sha256": data_meta["csv_sha256"]},
        "outputs": {"model": args.output},
        "model_config": model_cfg.to_dict(),
        "train_config": train_cfg.to_dict(),
        "data_config": vars(data_cfg),
        "seeds": {"init": model_cfg.seed, "shuffle": train_cfg.shuffle_seed},
        "loss_history": result.loss_history,
        "test_rmse": result.report.rmse,
        "test_r2": result.report.r2,
    })
    print(json.dumps(manifest, indent=2, sort_keys=True, default=str))
    return EXIT_OK


def _bundle_data_config(bundle: ModelBundle) -> DataConfig:
    d = bundle.data_config
    try:
        return DataConfig(feature=d.get("feature", "Adj Close"), ratio=float(d.get("ratio", "0.9")),
                          fit_scaler_on=d.get("fit_scaler_on", "train"))
    except ValueError as exc:
        raise DataError(f"model file carries an invalid data section: {exc}") from None


def cmd_evaluate(args) -> int:
    started = datetime.now(timezone.utc)
    bundle = load(args.model)
    data_cfg = _bundle_data_config(bundle)
    series = _load_series(args.csv, data_cfg.feature)
    recorded = bundle.data_config.get("csv_sha256")
    if recorded and recorded != _sha256(args.csv):
        log.warning("CSV differs from the one the model was trained on; the split will not match the training run")
    if bundle.data_config.get("rows") and int(bundle.data_config["rows"]) != len(series):
        log.warning("split mismatch: model trained on %s rows, CSV has %d",
                    bundle.data_config["rows"], len(series))

    t = bundle.model_config.time_step
    start = time.perf_counter()
    prepared = prepare(series, data_cfg, t)
    train_scaled = scale(bundle.scaler, np.asarray(prepared.split.train.values))
    test_scaled = scale(bundle.scaler, np.asarray(prepared.split.test.values))
    windows = make_test_windows(train_scaled, test_scaled, t)
    report = evaluate(bundle.params(), bundle.scaler, windows, prepared.split.test.dates)
    elapsed = time.perf_counter() - start

    _emit(report.to_csv(decimals=args.decimals), args.output)
    if args.predictions:
        Path(args.predictions).write_text(report.predictions_csv(), encoding="utf-8")
    print(report.summary(), file=sys.stderr if not args.output else sys.stdout)
    _write_manifest(args, started, elapsed, {
        "inputs": {"model": args.model, "csv": args.csv},
        "rmse": report.rmse, "r2": report.r2, "rows": len(report),
    })
    return EXIT_OK


def cmd_predict(args) -> int:
    bundle = load(args.model)
    data_cfg = _bundle_data_config(bundle)
    series = _load_series(args.csv, data_cfg.feature)
    t = bundle.model_config.time_step
    if len(series) < t:
        raise DataError(f"need at least {t} rows to forecast, got {len(series)}")
    window = scale(bundle.scaler, np.asarray(series.values[-t:]))
    value = float(bundle.scaler.min + predict(bundle.params(), window[None, :])[0] * (bundle.scaler.max - bundle.scaler.min))
    _emit(f"after_date,predicted\n{series.dates[-1].isoformat()},{value!r}\n", args.output)
    return EXIT_OK


def _compare_rows(args) -> tuple[list[dict], bool]:
    model_cfg, train_cfg, data_cfg = _configs(args)
    series = _load_series(args.csv, data_cfg.feature)
    split = chronological_split(series, data_cfg.ratio)
    rows = []
    primary_failed = False

    def lstm_row(name, cfg):
        try:
            res = run(series, cfg, train_cfg, data_cfg)
            return {"algorithm": name, "rmse": res.report.rmse, "time_sec": res.elapsed,
                    "r2": res.report.r2, "status": "ok"}
        except (ForecastError, ValueError, ArithmeticError) as exc:
            return {"algorithm": name, "rmse": "", "time_sec": "", "r2": "", "status": f"error: {exc}"}

    base = dict(model_cfg.to_dict())
    rows.append(lstm_row("LSTM (Unit 1)", ModelConfig(**{**base, "hidden_units": 1, "attention_dim": None, "attention": False})))
    rows.append(lstm_row("LSTM (Unit 50)", ModelConfig(**{**base, "hidden_units": 50, "attention_dim": None, "attention": False})))
    for name in NOT_IMPLEMENTED:
        rows.append({"algorithm": name, "rmse": "", "time_sec": "", "r2": "", "status": "not-implemented"})

    def baseline_row(name, fn):
        start = time.perf_counter()
        try:
            fc = fn()
            rep = forecast_report(split.test.dates, split.test.values, fc.predicted)
            return {"algorithm": name, "rmse": rep.rmse, "time_sec": time.perf_counter() - start,
                    "r2": rep.r2, "status": "ok"}
        except (ForecastError, ValueError) as exc:
            return {"algorithm": name, "rmse": "", "time_sec": "", "r2": "", "status": f"error: {exc}"}

    rows.append(baseline_row("ARIMA", lambda: random_walk_forecast(split.train, split.test)))
    n = args.sma_window
    if n is None:
        candidates = [c for c in (10, 20, 50) if c <= len(split.train)]
        n = best_sma_window(split.train.values, candidates)[0] if candidates else 1
    rows.append(baseline_row(f"SMA ({n})", lambda: sma_forecast(split.train, split.test, n)))

    proposed = lstm_row("Proposed Model", model_cfg)
    primary_failed = proposed["status"] != "ok"
    rows.append(proposed)
    return rows, primary_failed


def cmd_compare(args) -> int:
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    rows, failed = _compare_rows(args)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["algorithm", "rmse", "time_sec", "r2", "status"], lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in r.items()})
    _emit(buf.getvalue(), args.output)
    _write_manifest(args, started, time.perf_counter() - t0, {"inputs": {"csv": args.csv}, "rows": rows})
    if failed:
        status = rows[-1]["status"]
        print(f"proposed model failed: {status}", file=sys.stderr)
        return EXIT_NUMERIC if "non-finite" in status else EXIT_DATA
    return EXIT_OK


def cmd_indicators(args) -> int:
    records = read_csv(args.csv)
    series = select_feature(records, args.feature)
    try:
        periods = [int(x) for x in args.sma.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--sma expects comma-separated integers, got {args.sma!r}") from None
    periods = [n for n in periods if n <= len(series)]
    columns = {n: dict(zip(s.dates, s.values)) for n in periods for s in [sma(series.values, n, series.dates)]}

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date", args.feature] + [f"sma_{n}" for n in periods])
    for d, v in zip(series.dates, series.values):
        w.writerow([d.isoformat(), repr(v)] + [repr(float(columns[n][d])) if d in columns[n] else "" for n in periods])
    _emit(buf.getvalue(), args.output)
    if periods:
        best, scores = best_sma_window(series.values, periods)
        print("sma rmse: " + " ".join(f"{n}={scores[n]:.6g}" for n in sorted(scores)) + f" best={best}",
              file=sys.stderr)

    corr = pearson_correlation({f: [r.value(f) for r in records] for f in NUMERIC_FIELDS})
    cbuf = io.StringIO()
    w = csv.writer(cbuf, lineterminator="\n")
    w.writerow([""] + list(corr.labels))
    for label, row in zip(corr.labels, corr.entries):
        w.writerow([label] + [f"{x:.6f}" for x in row])
    if args.corr:
        Path(args.corr).write_text(cbuf.getvalue(), encoding="utf-8")
    else:
        sys.stdout.write("\n" + cbuf.getvalue())
    return EXIT_OK


def cmd_replay(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    argv = list(manifest["argv"])
    if args.output:
        if "--output" in argv:
            argv[argv.index("--output") + 1] = args.output
        else:
            argv += ["--output", args.output]
    if args.quiet:
        argv = ["--quiet"] + argv
    return main(argv)


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "compare": cmd_compare,
    "indicators": cmd_indicators,
    "replay": cmd_replay,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    # epoch lines are printed by the CLI itself
    logging.getLogger("ssamforecast.training").setLevel(logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ModelStoreError, ShapeError) as exc:
        print(f"{args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # invalid flag values caught by config validation
        print(f"{args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"{args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
