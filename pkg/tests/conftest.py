from pathlib import Path

import numpy as np
import pytest

from deepfolio.market_data import PriceSeries, ingest_csv
from deepfolio.synthetic import trading_calendar

DATA_DIR = Path(__file__).parent / "data"
FIXTURE_CSV = DATA_DIR / "market_4asset_1200d.csv"


@pytest.fixture(scope="session")
def fixture_series() -> PriceSeries:
    return ingest_csv(FIXTURE_CSV)


def make_series(closes, highs=None, start_features=("close", "high"), cash=True):
    """Hand-rolled PriceSeries from a (assets, days) close matrix."""
    closes = np.asarray(closes, dtype=np.float64)
    if highs is None:
        highs = closes * 1.001
    n_assets, n_days = closes.shape
    prices = np.stack([closes, np.asarray(highs, dtype=np.float64)], axis=2)
    names = [f"S{i}" for i in range(n_assets)]
    if cash:
        prices = np.concatenate([np.ones((1, n_days, 2)), prices], axis=0)
        names = ["CASH"] + names
    return PriceSeries(
        dates=trading_calendar(__import__("datetime").date(2015, 1, 5), n_days),
        prices=prices,
        asset_names=tuple(names),
        feature_names=tuple(start_features),
    )
