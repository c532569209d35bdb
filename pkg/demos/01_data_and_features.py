"""Walk through the data layer: ingest a market CSV, inspect price
relatives, build a self-normalized observation window, and split the
panel into train and test periods.

Run from the repository root:  python demos/01_data_and_features.py
"""

from pathlib import Path

import numpy as np

from deepfolio import build_state, ingest_csv, price_relative, split

CSV = Path(__file__).resolve().parents[1] / "tests" / "data" / "market_4asset_1200d.csv"

series = ingest_csv(CSV)
print("loaded", CSV.name)
print("  assets  :", ", ".join(series.asset_names), "(index 0 is constant-price cash)")
print("  features:", ", ".join(series.feature_names))
print("  days    :", series.num_days, f"({series.dates[0]} .. {series.dates[-1]})")

# price relatives: elementwise close ratios between consecutive days
y = price_relative(series, 1)
print("\nday-1 price relatives:", np.round(y, 5))
print("cash entry is exactly 1:", y[0] == 1.0)

# cumulative product of relatives rebuilds the price path
ratios = np.stack([price_relative(series, t) for t in range(1, 100)], axis=1)
rebuilt = np.cumprod(ratios, axis=1)[:, -1] * series.closes[:, 0]
print("day-99 closes rebuilt from relatives:", np.allclose(rebuilt, series.closes[:, 99]))

# a state window: every channel divided by the asset's latest close
state = build_state(series, t=60, window_size=5, prev_weights=np.full(5, 0.2))
print("\nstate window shape (assets, window, features):", state.window.shape)
print("close channel of asset 1 (last column is 1 by construction):")
print(np.round(state.window[1, :, series.close_feature], 5))

# calendar split; the test slice keeps leading context for windowing
train, test = split(series, "2015-12-31", series.dates[-1], context=50)
print("\ntrain:", train.num_days, "days ending", train.dates[-1])
print("test :", test.num_days, "days,", test.context, "of them non-tradable context")
print("first tradable test day:", test.dates[test.context])
