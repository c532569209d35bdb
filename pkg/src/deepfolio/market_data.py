"""Market data ingestion, price relatives, and windowed state tensors.

Conventions used throughout the engine:

* asset axis 0 is the risk-free cash asset, synthesized at a constant
  price of 1.0;
* prices are stored as a float64 array of shape
  ``(num_assets, num_days, num_features)``;
* the close of day t doubles as the open of day t+1, so close-to-close
  ratios fully drive portfolio transitions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from datetime import date as Date
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import InsufficientDataError, ParseError, ValidationError

CASH_NAME = "CASH"
CLOSE = "close"


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


def parse_date(value: str | Date) -> Date:
    if isinstance(value, Date):
        return value
    try:
        return datetime.strptime(value, "%Y-%m-%d").date()
    except ValueError as exc:
        raise ValidationError(f"bad ISO-8601 date {value!r}") from exc


@dataclass(frozen=True)
class PriceSeries:
    """Immutable per-asset price panel with a constant-price cash row.

    ``context`` marks how many leading days are history-only (present so
    that windowed states can be built, but not tradable); it is nonzero
    only on the test slice produced by :func:`split`.
    """

    dates: tuple[Date, ...]
    prices: np.ndarray  # (assets, days, features), read-only float64
    asset_names: tuple[str, ...]
    feature_names: tuple[str, ...] = (CLOSE,)
    cash_index: int = 0
    context: int = 0
    dropped_days: int = 0

    def __post_init__(self):
        object.__setattr__(self, "prices", _readonly(self.prices))
        p = self.prices
        if p.ndim != 3:
            raise ValidationError(f"prices must be 3-D, got shape {p.shape}")
        if p.shape[0] != len(self.asset_names):
            raise ValidationError("asset_names length does not match prices")
        if p.shape[1] != len(self.dates):
            raise ValidationError("dates length does not match prices")
        if p.shape[2] != len(self.feature_names):
            raise ValidationError("feature_names length does not match prices")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise ValidationError("all prices must be strictly positive and finite")
        cash = p[self.cash_index]
        if cash.size and (np.ptp(cash) != 0.0):
            raise ValidationError("cash row must be constant across days and features")
        d = self.dates
        if any(d[i] >= d[i + 1] for i in range(len(d) - 1)):
            raise ValidationError("dates must be strictly increasing with no duplicates")
        if not 0 <= self.context <= len(d):
            raise ValidationError("context out of range")

    @property
    def num_assets(self) -> int:
        return self.prices.shape[0]

    @property
    def num_days(self) -> int:
        return self.prices.shape[1]

    @property
    def num_features(self) -> int:
        return self.prices.shape[2]

    @property
    def close_feature(self) -> int:
        return self.feature_names.index(CLOSE)

    @property
    def closes(self) -> np.ndarray:
        """(assets, days) view of the close channel."""
        return self.prices[:, :, self.close_feature]

    def with_features(self, names: tuple[str, ...], prices: np.ndarray) -> "PriceSeries":
        return replace(self, feature_names=tuple(names), prices=prices)

    def select_features(self, names: list[str] | tuple[str, ...]) -> "PriceSeries":
        idx = []
        for n in names:
            if n not in self.feature_names:
                raise ValidationError(f"feature {n!r} not available; have {self.feature_names}")
            idx.append(self.feature_names.index(n))
        return self.with_features(tuple(names), self.prices[:, :, idx])

    def slice_days(self, lo: int, hi: int, context: int = 0) -> "PriceSeries":
        return replace(
            self,
            dates=self.dates[lo:hi],
            prices=self.prices[:, lo:hi, :],
            context=context,
        )


@dataclass(frozen=True)
class StateTensor:
    """Observation handed to a policy: a self-normalized price window
    plus the weights the portfolio currently sits at."""

    window: np.ndarray  # (assets, window_size, features), read-only
    prev_weights: np.ndarray  # (assets,), read-only
    t: int

    def __post_init__(self):
        object.__setattr__(self, "window", _readonly(self.window))
        object.__setattr__(self, "prev_weights", _readonly(self.prev_weights))


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for :func:`ingest_csv`.

    ``asset_columns`` maps asset name -> {feature -> csv column}.  When
    None, assets are inferred from header columns named ``<ASSET>_close``
    (and ``<ASSET>_high`` when present).
    """

    date_column: str = "date"
    asset_columns: dict[str, dict[str, str]] | None = None


def _infer_schema(fieldnames: list[str], date_column: str) -> dict[str, dict[str, str]]:
    assets: dict[str, dict[str, str]] = {}
    for col in fieldnames:
        if col == date_column or "_" not in col:
            continue
        name, _, feat = col.rpartition("_")
        if feat in ("close", "high"):
            assets.setdefault(name, {})[feat] = col
    assets = {k: v for k, v in assets.items() if "close" in v}
    if not assets:
        raise ParseError(f"no '<ASSET>_close' columns found besides {date_column!r}")
    return assets


def ingest_csv(
    path: str | Path,
    schema: CsvSchema | None = None,
    window_size: int | None = None,
) -> PriceSeries:
    """Load a close/high CSV into a :class:`PriceSeries`, cash prepended.

    Days on which any asset value is blank are dropped (the drop count is
    recorded on the result).  Malformed numbers raise :class:`ParseError`
    with the offending line number; non-positive prices raise
    :class:`ValidationError`.  When ``window_size`` is given, fewer than
    ``window_size + 2`` usable days raises :class:`InsufficientDataError`.
    """
    schema = schema or CsvSchema()
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError("empty CSV: missing header row")
        if schema.date_column not in reader.fieldnames:
            raise ParseError(f"missing date column {schema.date_column!r}")
        asset_cols = schema.asset_columns or _infer_schema(
            list(reader.fieldnames), schema.date_column
        )
        names = sorted(asset_cols)
        features = ["close"] + (
            ["high"] if all("high" in asset_cols[n] for n in names) else []
        )

        rows: list[tuple[Date, list[float]]] = []
        dropped = 0
        for line_no, row in enumerate(reader, start=2):
            raw_date = (row.get(schema.date_column) or "").strip()
            if not raw_date:
                raise ParseError("blank date", line=line_no)
            try:
                day = parse_date(raw_date)
            except ValidationError as exc:
                raise ParseError(str(exc), line=line_no) from exc
            values: list[float] = []
            missing = False
            for name in names:
                for feat in features:
                    col = asset_cols[name].get(feat)
                    raw = (row.get(col) or "").strip() if col else ""
                    if raw == "":
                        missing = True
                        continue
                    try:
                        v = float(raw)
                    except ValueError as exc:
                        raise ParseError(
                            f"column {col!r}: {raw!r} is not a number", line=line_no
                        ) from exc
                    if not np.isfinite(v) or v <= 0:
                        raise ValidationError(
                            f"line {line_no}: column {col!r}: price {v} is not strictly positive"
                        )
                    values.append(v)
            if missing:
                dropped += 1
                continue
            rows.append((day, values))

    if not rows:
        raise InsufficientDataError(f"{path}: no usable rows")
    rows.sort(key=lambda r: r[0])
    for (d1, _), (d2, _) in zip(rows, rows[1:]):
        if d1 == d2:
            raise ValidationError(f"duplicate date {d1.isoformat()}")

    min_days = (window_size + 2) if window_size is not None else 2
    if len(rows) < min_days:
        raise InsufficientDataError(
            f"{path}: {len(rows)} usable days, need at least {min_days}"
        )

    dates = tuple(d for d, _ in rows)
    n_days, n_assets, n_feats = len(rows), len(names), len(features)
    risky = np.array([v for _, v in rows], dtype=np.float64)  # (days, assets*feats)
    risky = risky.reshape(n_days, n_assets, n_feats).transpose(1, 0, 2)
    prices = np.concatenate(
        [np.ones((1, n_days, n_feats)), risky], axis=0
    )
    return PriceSeries(
        dates=dates,
        prices=prices,
        asset_names=(CASH_NAME, *names),
        feature_names=tuple(features),
        dropped_days=dropped,
    )


def price_relative(series: PriceSeries, t: int) -> np.ndarray:
    """Element-wise ratio of day-t closes to day-(t-1) closes.

    The cash entry is exactly 1.
    """
    if not 1 <= t < series.num_days:
        raise IndexError(f"t={t} outside [1, {series.num_days - 1}]")
    closes = series.closes
    y = closes[:, t] / closes[:, t - 1]
    y[series.cash_index] = 1.0
    return _readonly(y)


def build_state(
    series: PriceSeries,
    t: int,
    window_size: int,
    prev_weights: np.ndarray,
) -> StateTensor:
    """Assemble the (assets, window, features) observation ending at day t.

    Every channel of every asset is divided by that asset's day-t close,
    so the close channel's final column is identically 1 and the state is
    scale-free.
    """
    if window_size < 1:
        raise ValueError("window_size must be >= 1")
    if t < window_size:
        raise InsufficientDataError(
            f"t={t} has insufficient history for window_size={window_size}"
        )
    if t >= series.num_days:
        raise IndexError(f"t={t} outside series of {series.num_days} days")
    lo = t - window_size + 1
    block = series.prices[:, lo : t + 1, :]
    last_close = series.closes[:, t][:, None, None]
    window = block / last_close
    return StateTensor(window=window, prev_weights=np.array(prev_weights), t=t)


def split(
    series: PriceSeries,
    train_end: str | Date,
    test_end: str | Date,
    context: int = 0,
) -> tuple[PriceSeries, PriceSeries]:
    """Cut the panel into a train slice and a test slice at calendar dates.

    Train covers all days up to and including ``train_end``; test covers
    the days after it up to ``test_end``.  The test slice additionally
    keeps ``context`` leading days from the train period, flagged as
    non-tradable history so that window-based states can be built from
    the first true test day.
    """
    train_end = parse_date(train_end)
    test_end = parse_date(test_end)
    if train_end >= test_end:
        raise ValueError(f"train_end {train_end} must precede test_end {test_end}")
    dates = series.dates
    if train_end < dates[0] or test_end > dates[-1]:
        raise ValueError(
            f"split dates must fall within [{dates[0]}, {dates[-1]}]"
        )
    n_train = sum(1 for d in dates if d <= train_end)
    n_test_hi = sum(1 for d in dates if d <= test_end)
    if n_train == 0:
        raise ValueError(f"no days on or before {train_end}")
    if n_test_hi == n_train:
        raise ValueError(f"no test days in ({train_end}, {test_end}]")
    if context > n_train:
        raise InsufficientDataError(
            f"context={context} exceeds the {n_train} available train days"
        )
    train = series.slice_days(0, n_train)
    test = series.slice_days(n_train - context, n_test_hi, context=context)
    return train, test
