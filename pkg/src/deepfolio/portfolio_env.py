"""The portfolio MDP: drift under market movement, reallocation with
proportional transaction cost, and a log-wealth-plus-risk reward.

One step covers one trading day t: the weights held overnight earn the
day's price relatives and drift; at the close the submitted action
replaces the drifted weights, and the day's reward is

    log(y_t . w_held  -  mu * sum_i |action_i - drifted_i|)  +  beta * A_t

where A_t is a per-asset trailing return-over-volatility term weighted by
the held portfolio.  With beta = 0 the rewards telescope: their sum over
an episode equals log(final wealth / initial wealth) exactly.

Actions are therefore target weights that take effect at the close of the
day after the observation they were computed from, consistent with
orders placed against the next available price.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import log
from typing import Any

import numpy as np

from .errors import InsufficientDataError, ValidationError
from .market_data import PriceSeries, StateTensor, build_state, price_relative

#: floor used when cost exceeds gross return and the log argument dies
WEALTH_FLOOR_RATIO = 1e-6

SIMPLEX_ATOL = 1e-9

#: a trailing-return std below this is degenerate volatility; constant
#: growth paths land at ~1e-16 through float rounding alone, and dividing
#: by that would let the risk term dwarf every other reward component
DEGENERATE_STD = 1e-12


@dataclass(frozen=True)
class EnvConfig:
    """Environment hyperparameters; every backtest report records them."""

    mu: float = 0.0025  # transaction cost per unit turnover
    beta: float = 0.01  # risk-term coefficient
    vol_window: int = 20  # trailing days for the risk term
    window_size: int = 50  # observation history length
    gamma: float = 0.99  # discount used by the agents

    def __post_init__(self):
        if not 0.0 <= self.mu <= 0.05:
            raise ValidationError(f"mu={self.mu} outside [0, 0.05]")
        if self.beta < 0:
            raise ValidationError(f"beta={self.beta} must be >= 0")
        if self.vol_window < 2:
            raise ValidationError(f"vol_window={self.vol_window} must be >= 2")
        if self.window_size < 1:
            raise ValidationError(f"window_size={self.window_size} must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValidationError(f"gamma={self.gamma} outside [0, 1]")


@dataclass(frozen=True)
class EpisodeStep:
    """One (state, action, reward, next-state) replay record."""

    state: StateTensor
    action: np.ndarray
    reward: float
    next_state: StateTensor
    done: bool
    info: dict[str, Any] = field(default_factory=dict)


def validate_weights(w: np.ndarray, n_assets: int) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (n_assets,):
        raise ValidationError(f"weights shape {w.shape} != ({n_assets},)")
    if np.any(w < -1e-12) or not np.all(np.isfinite(w)):
        raise ValidationError("weights must be non-negative and finite")
    if abs(float(w.sum()) - 1.0) > SIMPLEX_ATOL:
        raise ValidationError(f"weights sum {w.sum()!r} != 1")
    return w


def cash_weights(n_assets: int, cash_index: int = 0) -> np.ndarray:
    w = np.zeros(n_assets)
    w[cash_index] = 1.0
    return w


def drift(w_prev: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Weights after one day of market movement: y*w / (y.w)."""
    gross = float(y @ w_prev)
    assert gross > 0, "price relatives and simplex weights keep y.w positive"
    return (y * w_prev) / gross


def wealth_update(
    p_prev: float, w_prev: np.ndarray, y: np.ndarray, mu: float = 0.0, turnover: float = 0.0
) -> float:
    """Portfolio value after one day; cost is charged on turnover at rate mu.

    With mu or turnover zero this is the pre-cost value (y.w) * p_prev.
    """
    if p_prev <= 0:
        raise ValidationError(f"portfolio value must be positive, got {p_prev}")
    return (float(y @ w_prev) - mu * turnover) * p_prev


def volatility_term(
    series: PriceSeries, t: int, w_prev: np.ndarray, l: int
) -> float:
    """Held-portfolio sum of trailing L-day return over trailing return
    volatility; cash contributes zero, as do assets with degenerate
    (zero) volatility."""
    a, _ = _volatility_term_flags(series, t, w_prev, l)
    return a


def _volatility_term_flags(
    series: PriceSeries, t: int, w_prev: np.ndarray, l: int
) -> tuple[float, tuple[int, ...]]:
    if t < l + 1:
        raise InsufficientDataError(f"t={t} needs at least {l + 1} days of history")
    closes = series.closes
    total = 0.0
    degenerate: list[int] = []
    for i in range(series.num_assets):
        if i == series.cash_index or w_prev[i] == 0.0:
            continue
        window = closes[i, t - l : t]  # v_{t-L} .. v_{t-1}
        trailing_ret = (window[-1] - window[0]) / window[0]
        daily = window[1:] / window[:-1] - 1.0
        sd = float(np.std(daily, ddof=1)) if len(daily) >= 2 else 0.0
        if sd < DEGENERATE_STD:
            degenerate.append(i)
            continue
        total += float(w_prev[i]) * trailing_ret / sd
    return total, tuple(degenerate)


class PortfolioEnv:
    """Single-owner mutable episode state over a shared read-only series.

    ``first_tradable``/``last_tradable`` bound the day indices an episode
    may cover; the leading ``series.context`` days and the warmup needed
    by the observation window and the risk term are excluded
    automatically.
    """

    def __init__(self, series: PriceSeries, config: EnvConfig, last_tradable: int | None = None):
        self.series = series
        self.config = config
        self.min_start = max(config.window_size, config.vol_window + 1, series.context)
        self.last_tradable = series.num_days - 1 if last_tradable is None else last_tradable
        if not self.min_start < self.last_tradable:
            raise InsufficientDataError(
                f"series of {series.num_days} days cannot host an episode "
                f"(needs start {self.min_start} < end {self.last_tradable})"
            )
        self._t: int | None = None
        self._weights: np.ndarray | None = None
        self._wealth = 1.0
        self._done = True

    @property
    def n_assets(self) -> int:
        return self.series.num_assets

    @property
    def t(self) -> int:
        if self._t is None:
            raise RuntimeError("environment not reset")
        return self._t

    @property
    def wealth(self) -> float:
        return self._wealth

    @property
    def done(self) -> bool:
        return self._done

    def reset(self, start: int | None = None, initial_weights: np.ndarray | None = None) -> StateTensor:
        """Start an episode at day ``start`` (default: earliest legal day)
        holding ``initial_weights`` (default: all cash) at wealth 1."""
        start = self.min_start if start is None else int(start)
        if start < self.min_start:
            raise InsufficientDataError(
                f"start={start} precedes the first legal start {self.min_start}"
            )
        if start >= self.last_tradable:
            raise InsufficientDataError(
                f"start={start} leaves no tradable days before {self.last_tradable}"
            )
        if initial_weights is None:
            initial_weights = cash_weights(self.n_assets, self.series.cash_index)
        self._weights = validate_weights(initial_weights, self.n_assets)
        self._wealth = 1.0
        self._t = start
        self._done = False
        return self._state()

    def _state(self) -> StateTensor:
        return build_state(self.series, self._t, self.config.window_size, self._weights)

    def step(self, action: np.ndarray) -> EpisodeStep:
        """Advance one trading day under the held weights, then reallocate
        to ``action`` at the new close."""
        if self._done or self._t is None:
            raise RuntimeError("step() called on a finished episode; call reset()")
        cfg = self.config
        action = validate_weights(action, self.n_assets)
        state = self._state()
        t = self._t + 1

        y = price_relative(self.series, t)
        drifted = drift(self._weights, y)
        turnover = float(np.abs(action - drifted).sum())
        gross = float(y @ self._weights)
        a_term, degenerate = _volatility_term_flags(self.series, t, self._weights, cfg.vol_window)

        ratio = gross - cfg.mu * turnover
        ruined = ratio <= 0.0
        if ruined:
            ratio = WEALTH_FLOOR_RATIO
        reward = log(ratio) + cfg.beta * a_term

        self._wealth *= ratio
        self._weights = action
        self._t = t
        self._done = ruined or t >= self.last_tradable

        info = {
            "date": self.series.dates[t],
            "drifted_weights": drifted,
            "turnover": turnover,
            "wealth_ratio": ratio,
            "wealth": self._wealth,
            "volatility_term": a_term,
            "degenerate_volatility": degenerate,
            "cost_exceeded_return": ruined,
        }
        return EpisodeStep(
            state=state,
            action=action,
            reward=reward,
            next_state=self._state(),
            done=self._done,
            info=info,
        )
