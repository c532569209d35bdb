"""Minimum-variance stock subset selection.

Given training-period returns, the closed-form minimum-variance weights
over a covariance matrix C are w = C^-1 1 / (1^T C^-1 1), achieving
variance 1 / (1^T C^-1 1).  Subset selection enumerates every k-asset
combination of the universe and keeps the one with the smallest
achievable variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, islice
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalError, ValidationError
from .market_data import PriceSeries

DEFAULT_ENUMERATION_CAP = 20_000_000
_CHUNK = 65_536


@dataclass(frozen=True)
class CovarianceEstimate:
    """Symmetric ridge-stabilized covariance of simple daily returns."""

    matrix: np.ndarray
    asset_ids: tuple[int, ...]
    ridge: float


@dataclass(frozen=True)
class MinVarResult:
    """Closed-form minimum-variance solution over one asset subset.

    Weights sum to 1 but may be negative (the unconstrained closed form
    allows short positions).  ``n_combinations`` is filled only by
    :func:`select_subset`.
    """

    weights: np.ndarray
    variance: float
    subset: tuple[int, ...]
    n_combinations: int | None = None


def empirical_covariance(
    series: PriceSeries,
    subset: Sequence[int],
    ridge: float | None = None,
) -> CovarianceEstimate:
    """Unbiased covariance of close-to-close simple returns for a subset.

    ``ridge`` (default 1e-8 * mean diagonal) is added to the diagonal so
    the matrix factorizes even for degenerate return histories.
    """
    subset = tuple(int(i) for i in subset)
    if series.cash_index in subset:
        raise ValidationError("covariance subset must exclude the cash asset")
    if len(set(subset)) != len(subset):
        raise ValidationError("covariance subset has duplicate assets")
    closes = series.closes[list(subset)]
    if closes.shape[1] < 4:
        raise ValidationError(
            f"need >= 3 return observations, have {closes.shape[1] - 1}"
        )
    rets = closes[:, 1:] / closes[:, :-1] - 1.0
    cov = np.cov(rets, ddof=1)
    cov = np.atleast_2d(cov)
    cov = 0.5 * (cov + cov.T)
    if ridge is None:
        ridge = 1e-8 * float(np.trace(cov)) / cov.shape[0]
    cov = cov + ridge * np.eye(cov.shape[0])
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"covariance singular even with ridge {ridge:g}; increase the ridge"
        ) from exc
    return CovarianceEstimate(matrix=cov, asset_ids=subset, ridge=float(ridge))


def min_variance_weights(cov: CovarianceEstimate) -> MinVarResult:
    """Solve the sum-to-one minimum-variance problem in closed form.

    Uses a linear solve C x = 1 (never an explicit inverse); the variance
    is 1 / (1^T x).
    """
    c = cov.matrix
    ones = np.ones(c.shape[0])
    try:
        x = np.linalg.solve(c, ones)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("covariance matrix is singular") from exc
    denom = float(ones @ x)
    if denom <= 0 or not math.isfinite(denom):
        raise NumericalError("covariance matrix is not positive definite")
    return MinVarResult(
        weights=x / denom, variance=1.0 / denom, subset=cov.asset_ids
    )


def select_subset(
    series: PriceSeries,
    k: int,
    universe: Sequence[int] | None = None,
    *,
    ridge: float | None = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
    progress: Callable[[int, int], None] | None = None,
) -> MinVarResult:
    """Exhaustively search all k-of-universe subsets for the lowest
    minimum-variance portfolio.

    Ties are broken toward the lexicographically smallest subset (the
    enumeration is lexicographic and only strict improvements replace the
    incumbent).  ``progress(done, total)`` is invoked once per internal
    chunk.  Exceeding ``cap`` combinations raises before any work is done.
    """
    if universe is None:
        universe = [i for i in range(series.num_assets) if i != series.cash_index]
    universe = sorted(int(i) for i in universe)
    if series.cash_index in universe:
        raise ValidationError("universe must exclude the cash asset")
    if not 1 <= k <= len(universe):
        raise ValidationError(f"k={k} must be in [1, {len(universe)}]")
    total = math.comb(len(universe), k)
    if total > cap:
        raise ValidationError(
            f"{total} combinations exceed the enumeration cap {cap}; "
            "shrink the universe or raise the cap"
        )

    full_cov = empirical_covariance(series, universe, ridge=ridge).matrix

    best_var = math.inf
    best_combo: tuple[int, ...] | None = None
    done = 0
    it = combinations(range(len(universe)), k)
    while True:
        chunk = np.array(list(islice(it, _CHUNK)), dtype=np.intp)
        if chunk.size == 0:
            break
        mats = full_cov[chunk[:, :, None], chunk[:, None, :]]
        try:
            xs = np.linalg.solve(mats, np.ones((len(chunk), k, 1)))[..., 0]
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                "singular covariance submatrix during enumeration; increase the ridge"
            ) from exc
        denoms = xs.sum(axis=1)
        variances = np.where(denoms > 0, 1.0 / denoms, math.inf)
        j = int(np.argmin(variances))
        if variances[j] < best_var:
            best_var = float(variances[j])
            best_combo = tuple(chunk[j])
        done += len(chunk)
        if progress is not None:
            progress(done, total)

    assert best_combo is not None and math.isfinite(best_var)
    subset = tuple(universe[j] for j in best_combo)
    sub_cov = CovarianceEstimate(
        matrix=full_cov[np.ix_(list(best_combo), list(best_combo))],
        asset_ids=subset,
        ridge=0.0,
    )
    result = min_variance_weights(sub_cov)
    return MinVarResult(
        weights=result.weights,
        variance=result.variance,
        subset=subset,
        n_combinations=done,
    )
