"""Reference policies: uniform rebalancing, follow-the-winner, and
follow-the-loser.

All three are deterministic functions of the latest completed day, so
their backtests replay bit-identically.  Winner/loser read yesterday's
price relatives straight off the observation window (the close channel's
final two columns), never anything ahead of it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market_data import StateTensor

CASH = 0  # cash asset index across the engine


def ucrp_action(m: int, include_cash: bool = False) -> np.ndarray:
    """Equal weights over the m risky assets (cash optionally included)."""
    if m < 1:
        raise ValueError("need at least one risky asset")
    if include_cash:
        return np.full(m + 1, 1.0 / (m + 1))
    w = np.full(m + 1, 1.0 / m)
    w[CASH] = 0.0
    return w


def winner_action(y_yesterday: np.ndarray) -> np.ndarray:
    """All weight on the risky asset with the highest return yesterday;
    ties go to the lowest index."""
    return _one_hot(y_yesterday, np.argmax)


def loser_action(y_yesterday: np.ndarray) -> np.ndarray:
    """All weight on the risky asset with the lowest return yesterday."""
    return _one_hot(y_yesterday, np.argmin)


def _one_hot(y: np.ndarray, pick) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    risky = np.delete(y, CASH)
    idx = int(pick(risky))  # first occurrence wins on ties
    if idx >= CASH:
        idx += 1
    w = np.zeros(len(y))
    w[idx] = 1.0
    return w


def relatives_from_state(state: StateTensor, close_feature: int) -> np.ndarray:
    """Yesterday's price relatives recovered from a self-normalized window.

    The close channel's final column is 1 by construction, so the ratio of
    the last two columns is exactly the last completed day's relatives.
    """
    closes = state.window[:, :, close_feature]
    if closes.shape[1] < 2:
        raise ValueError("window too short to recover price relatives")
    y = closes[:, -1] / closes[:, -2]
    y[CASH] = 1.0
    return y


@dataclass(frozen=True)
class BaselinePolicy:
    """Stateless policy adapter exposing the same ``act`` surface as the
    learning agents."""

    kind: str  # ucrp | winner | loser
    n_risky: int
    close_feature: int = 0
    include_cash: bool = False

    def __post_init__(self):
        if self.kind not in ("ucrp", "winner", "loser"):
            raise ValueError(f"unknown baseline {self.kind!r}")

    def act(self, state: StateTensor, explore: bool = False) -> np.ndarray:
        if self.kind == "ucrp":
            return ucrp_action(self.n_risky, self.include_cash)
        y = relatives_from_state(state, self.close_feature)
        return winner_action(y) if self.kind == "winner" else loser_action(y)
