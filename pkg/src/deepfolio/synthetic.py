"""Seeded synthetic markets for tests, demos, and shipped fixtures.

Real ingestion is CSV-based; these generators exist so the repository is
self-contained and every experiment is reproducible from a seed.
"""

from __future__ import annotations

import csv
from datetime import date as Date
from datetime import timedelta
from pathlib import Path

import numpy as np

from .market_data import CASH_NAME, PriceSeries


def trading_calendar(start: Date, n_days: int) -> tuple[Date, ...]:
    """n_days consecutive weekdays starting at (or after) ``start``."""
    out: list[Date] = []
    d = start
    while len(out) < n_days:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return tuple(out)


def _to_series(dates, closes, highs, names) -> PriceSeries:
    n_days = closes.shape[1]
    prices = np.stack([closes, highs], axis=2)  # (assets, days, 2)
    cash = np.ones((1, n_days, 2))
    return PriceSeries(
        dates=tuple(dates),
        prices=np.concatenate([cash, prices], axis=0),
        asset_names=(CASH_NAME, *names),
        feature_names=("close", "high"),
    )


def geometric_walk_market(
    n_assets: int,
    n_days: int,
    seed: int,
    *,
    drift: float = 0.0,
    vol: float = 0.01,
    start: Date = Date(2012, 1, 2),
    start_price: float = 100.0,
) -> PriceSeries:
    """IID log-return market: each risky asset follows an independent
    geometric random walk; highs sit a small random margin above closes."""
    rng = np.random.default_rng(seed)
    log_ret = rng.normal(drift, vol, size=(n_assets, n_days - 1))
    closes = start_price * np.exp(
        np.concatenate([np.zeros((n_assets, 1)), np.cumsum(log_ret, axis=1)], axis=1)
    )
    highs = closes * (1.0 + np.abs(rng.normal(0.0, vol / 2, size=closes.shape)))
    return _to_series(trading_calendar(start, n_days), closes, highs, _names(n_assets))


def trending_market(
    rates: list[float],
    n_days: int,
    *,
    start: Date = Date(2012, 1, 2),
    start_price: float = 100.0,
) -> PriceSeries:
    """Deterministic market: asset i grows by a fixed rate per day."""
    n_assets = len(rates)
    t = np.arange(n_days)
    closes = start_price * (1.0 + np.asarray(rates))[:, None] ** t[None, :]
    highs = closes * 1.001
    return _to_series(trading_calendar(start, n_days), closes, highs, _names(n_assets))


def planted_low_variance_universe(
    n_assets: int,
    n_planted: int,
    n_days: int,
    seed: int,
    *,
    quiet_vol: float = 1e-5,
    noisy_vol: float = 0.02,
    start: Date = Date(2012, 1, 2),
) -> tuple[PriceSeries, list[int]]:
    """Universe where ``n_planted`` uncorrelated near-constant assets are
    hidden among volatile ones.  Returns the series and the planted risky
    asset indices (cash excluded, i.e. indices into the risky block + 1).
    """
    rng = np.random.default_rng(seed)
    vols = np.full(n_assets, noisy_vol)
    vols[:n_planted] = quiet_vol
    log_ret = rng.normal(0.0, 1.0, size=(n_assets, n_days - 1)) * vols[:, None]
    closes = 100.0 * np.exp(
        np.concatenate([np.zeros((n_assets, 1)), np.cumsum(log_ret, axis=1)], axis=1)
    )
    highs = closes * 1.0005
    series = _to_series(trading_calendar(start, n_days), closes, highs, _names(n_assets))
    return series, [i + 1 for i in range(n_planted)]


def _names(n: int) -> list[str]:
    return [f"A{i:02d}" for i in range(n)]


def write_market_csv(path: str | Path, series: PriceSeries) -> None:
    """Write the risky assets of a series in the engine's CSV layout
    (``date,<ASSET>_close,<ASSET>_high,...``)."""
    path = Path(path)
    risky = [i for i in range(series.num_assets) if i != series.cash_index]
    close_f = series.close_feature
    high_f = series.feature_names.index("high") if "high" in series.feature_names else None
    header = ["date"]
    for i in risky:
        header.append(f"{series.asset_names[i]}_close")
        if high_f is not None:
            header.append(f"{series.asset_names[i]}_high")
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, day in enumerate(series.dates):
            row: list[str] = [day.isoformat()]
            for i in risky:
                row.append(repr(float(series.prices[i, t, close_f])))
                if high_f is not None:
                    row.append(repr(float(series.prices[i, t, high_f])))
            w.writerow(row)
