"""Command-line entry point.

Subcommands: ingest, denoise, select, train, backtest, compare.
Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .agents import load_agent
from .backtest import (
    BASELINES,
    backtest,
    build_policy,
    format_metrics,
    prepare_series,
    run_compare,
    write_report_csv,
)
from .config import KNOWN_AGENTS, RunConfig
from .denoise import denoise_series
from .errors import ConfigError, DataError, EngineError, NumericalError
from .market_data import ingest_csv, split
from .selection import select_subset
from .synthetic import write_market_csv


def _load_config(args) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "agent", None):
        config.agent = args.agent
    return config.validate()


def cmd_ingest(args) -> int:
    series = ingest_csv(args.input, window_size=args.window_size)
    print(f"assets      : {', '.join(series.asset_names)} (cash prepended)")
    print(f"features    : {', '.join(series.feature_names)}")
    print(f"days        : {series.num_days}")
    print(f"date range  : {series.dates[0].isoformat()} .. {series.dates[-1].isoformat()}")
    print(f"dropped days: {series.dropped_days}")
    if args.out:
        write_market_csv(args.out, series)
        print(f"normalized CSV written to {args.out}")
    return 0


def cmd_denoise(args) -> int:
    with open(args.input, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or args.column not in reader.fieldnames:
            raise DataError(f"column {args.column!r} not found in {args.input}")
        date_col = "date" if "date" in (reader.fieldnames or []) else None
        dates, values = [], []
        for row in reader:
            dates.append(row[date_col] if date_col else str(len(values)))
            try:
                values.append(float(row[args.column]))
            except ValueError as exc:
                raise DataError(f"non-numeric value in column {args.column!r}") from exc
    denoised = denoise_series(np.array(values), levels=args.levels, wavelet=args.wavelet)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", args.column, f"{args.column}_denoised"])
        for day, orig, den in zip(dates, values, denoised):
            writer.writerow([day, repr(orig), repr(float(den))])
    print(f"wrote {len(values)} rows to {out}")
    return 0


def cmd_select(args) -> int:
    config = _load_config(args)
    series = ingest_csv(args.input or config.data_csv)
    train_end = args.train_end or config.train_end
    if train_end:
        series, _ = split(series, train_end, series.dates[-1].isoformat())

    milestone = [0]

    def progress(done, total):
        if done - milestone[0] >= 1_000_000 or done == total:
            milestone[0] = done
            print(f"  ... {done}/{total} combinations", file=sys.stderr)

    result = select_subset(series, args.k, ridge=args.ridge, progress=progress)
    names = [series.asset_names[i] for i in result.subset]
    print(f"combinations enumerated: {result.n_combinations}")
    print(f"selected subset        : {', '.join(names)}")
    print(f"portfolio variance     : {float(result.variance)!r}")
    print("weights:")
    for name, w in zip(names, result.weights):
        print(f"  {name:12s} {float(w)!r}")
    print("csv:asset,weight")
    for name, w in zip(names, result.weights):
        print(f"csv:{name},{float(w)!r}")
    return 0


def cmd_train(args) -> int:
    config = _load_config(args)
    if config.agent in BASELINES:
        raise ConfigError(f"{config.agent} is a baseline; nothing to train")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_series, _ = prepare_series(config)
    policy = build_policy(
        config.agent, config, train_series, train_log=out / f"train_{config.agent}.csv"
    )
    ckpt = out / f"{config.agent}.ckpt"
    policy.save(ckpt)
    (out / "config_snapshot.cfg").write_text(config.to_text(), encoding="utf-8")
    print(f"checkpoint written to {ckpt}")
    print(f"training log written to {out / f'train_{config.agent}.csv'}")
    return 0


def cmd_backtest(args) -> int:
    config = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_series, test_series = prepare_series(config)
    if args.checkpoint:
        policy = load_agent(args.checkpoint)
    else:
        policy = build_policy(config.agent, config, train_series)
    report = backtest(policy, test_series, config)
    report.agent = config.agent
    write_report_csv(report, out / f"report_{config.agent}.csv")
    (out / "config_snapshot.cfg").write_text(config.to_text(), encoding="utf-8")
    print(format_metrics(report))
    print(f"report written to {out / f'report_{config.agent}.csv'}")
    return 0


def cmd_compare(args) -> int:
    config = _load_config(args)
    agents = [a.strip() for a in args.agents.split(",") if a.strip()]
    unknown = [a for a in agents if a not in KNOWN_AGENTS]
    if unknown:
        raise ConfigError(f"unknown agents: {unknown}; choose from {KNOWN_AGENTS}")
    if not agents:
        raise ConfigError("no agents given")
    reports = run_compare(config, agents, args.out)
    for report in reports:
        print(format_metrics(report))
        print()
    print(f"comparison bundle written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deepfolio",
        description="Transaction-cost-aware portfolio backtesting engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a market CSV and summarize it")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--window-size", type=int, default=None)
    p.add_argument("--out", default=None, help="write a normalized copy")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("denoise", help="whole-series wavelet denoise of one column")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--column", required=True)
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--wavelet", default="db4")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("select", help="minimum-variance subset search")
    p.add_argument("--in", dest="input", default=None)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--train-end", default=None)
    p.add_argument("--ridge", type=float, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="train one agent on the train split")
    p.add_argument("--agent", choices=[a for a in KNOWN_AGENTS if a not in BASELINES])
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("backtest", help="deterministic test-range replay")
    p.add_argument("--agent", choices=KNOWN_AGENTS)
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("compare", help="multi-agent comparison bundle")
    p.add_argument("--config", required=True)
    p.add_argument("--agents", default=",".join(KNOWN_AGENTS))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
