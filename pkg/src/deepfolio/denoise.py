"""1-D discrete wavelet transform with universal-threshold soft shrinkage.

Produces the denoised-close feature channel.  The transform uses
orthogonal Daubechies filters with half-sample symmetric boundary
extension; the extension keeps a few redundant boundary coefficients per
band, which is what makes the round trip exact for any signal length.

Filters are named by tap count: ``haar`` (2), ``db4`` (4), ``db6`` (6).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError
from .market_data import PriceSeries

_SQRT2 = np.sqrt(2.0)
_SQRT3 = np.sqrt(3.0)
_SQRT10 = np.sqrt(10.0)
_S10 = np.sqrt(5.0 + 2.0 * _SQRT10)

#: low-pass decomposition filters (computed, not transcribed, so the
#: orthogonality identities hold to machine precision)
WAVELETS: dict[str, np.ndarray] = {
    "haar": np.array([1.0, 1.0]) / _SQRT2,
    "db4": np.array([1 + _SQRT3, 3 + _SQRT3, 3 - _SQRT3, 1 - _SQRT3]) / (4 * _SQRT2),
    "db6": np.array(
        [
            1 + _SQRT10 + _S10,
            5 + _SQRT10 + 3 * _S10,
            10 - 2 * _SQRT10 + 2 * _S10,
            10 - 2 * _SQRT10 - 2 * _S10,
            5 + _SQRT10 - 3 * _S10,
            1 + _SQRT10 - _S10,
        ]
    )
    / (16 * _SQRT2),
}

#: MAD-to-sigma factor for Gaussian noise
MAD_SCALE = 0.6745

DENOISED_SUFFIX = "_denoised"


def _filters(wavelet: str) -> tuple[np.ndarray, np.ndarray]:
    try:
        lo = WAVELETS[wavelet]
    except KeyError:
        raise ValueError(f"unknown wavelet {wavelet!r}; choose from {sorted(WAVELETS)}")
    taps = len(lo)
    hi = ((-1.0) ** np.arange(taps)) * lo[::-1]
    return lo, hi


def _sym_ext(x: np.ndarray, n: int) -> np.ndarray:
    return np.concatenate([x[:n][::-1], x, x[-n:][::-1]])


def _dwt_single(x: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    ext = _sym_ext(x, len(lo) - 1)
    return (
        np.correlate(ext, lo, mode="valid")[1::2],
        np.correlate(ext, hi, mode="valid")[1::2],
    )


def _idwt_single(a: np.ndarray, d: np.ndarray, lo: np.ndarray, hi: np.ndarray, out_len: int):
    up_a = np.zeros(2 * len(a))
    up_a[::2] = a
    up_d = np.zeros(2 * len(d))
    up_d[::2] = d
    rec = np.convolve(up_a, lo) + np.convolve(up_d, hi)
    off = len(lo) - 2
    return rec[off : off + out_len]


def _level_lengths(n: int, levels: int, taps: int) -> list[int]:
    """Input length at each decomposition level, finest first."""
    lens = [n]
    for _ in range(levels - 1):
        lens.append((lens[-1] + taps - 1) // 2)
    return lens


@dataclass(frozen=True)
class WaveletDecomposition:
    """Coefficients of a multi-level transform.

    ``details[0]`` is the finest (level-1) band.  Coefficient lengths are
    fully determined by ``original_len``, the wavelet, and the level
    count, so reconstruction needs no extra bookkeeping.
    """

    approx: np.ndarray
    details: list[np.ndarray]
    wavelet_id: str
    original_len: int

    @property
    def levels(self) -> int:
        return len(self.details)


def decompose(signal: np.ndarray, levels: int, wavelet: str = "db4") -> WaveletDecomposition:
    """Split a signal into one approximation band and ``levels`` detail bands."""
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("signal must be 1-D")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    lo, hi = _filters(wavelet)
    min_len = max(2**levels, len(lo) - 1)
    if len(x) < min_len:
        raise InsufficientDataError(
            f"signal of length {len(x)} too short for {levels} level(s) with "
            f"{wavelet}; minimum length is {min_len}"
        )
    approx = x
    details: list[np.ndarray] = []
    for _ in range(levels):
        approx, d = _dwt_single(approx, lo, hi)
        details.append(d)
    return WaveletDecomposition(
        approx=approx, details=details, wavelet_id=wavelet, original_len=len(x)
    )


def reconstruct(dec: WaveletDecomposition) -> np.ndarray:
    """Invert :func:`decompose`; exact to float precision when the
    coefficients are unmodified."""
    lo, hi = _filters(dec.wavelet_id)
    lens = _level_lengths(dec.original_len, dec.levels, len(lo))
    a = dec.approx
    for d, n in zip(reversed(dec.details), reversed(lens)):
        a = _idwt_single(a, d, lo, hi, n)
    return a


def universal_threshold(details: np.ndarray, n: int) -> float:
    """Noise-calibrated shrinkage level sqrt(2 ln n) * median(|d|) / 0.6745.

    ``details`` should be the finest detail band; ``n`` is the original
    signal length.  All-zero details give T = 0.
    """
    d = np.asarray(details, dtype=np.float64)
    if d.size == 0:
        raise ValueError("details must be non-empty")
    if n < 2:
        raise ValueError("n must be >= 2")
    return float(np.sqrt(2.0 * np.log(n)) * np.median(np.abs(d)) / MAD_SCALE)


def soft_shrink(details: np.ndarray, t: float) -> np.ndarray:
    """Shrink coefficients toward zero by ``t``, zeroing those within +-t.

    Sign-preserving: soft_shrink(-d, t) == -soft_shrink(d, t).
    """
    if t < 0:
        raise ValueError(f"threshold must be non-negative, got {t}")
    d = np.asarray(details, dtype=np.float64)
    return np.sign(d) * np.maximum(np.abs(d) - t, 0.0)


def denoise_series(signal: np.ndarray, levels: int = 2, wavelet: str = "db4") -> np.ndarray:
    """Whole-series denoise: decompose, soft-shrink every detail band at
    the universal threshold estimated from the finest band, reconstruct.

    Uses the entire input at once, so the output at day t reflects later
    samples too; feed agent features through :func:`rolling_denoise`
    instead.  Output length equals input length.
    """
    dec = decompose(signal, levels, wavelet)
    t = universal_threshold(dec.details[0], dec.original_len)
    shrunk = [soft_shrink(d, t) for d in dec.details]
    return reconstruct(
        WaveletDecomposition(
            approx=dec.approx,
            details=shrunk,
            wavelet_id=dec.wavelet_id,
            original_len=dec.original_len,
        )
    )


def rolling_denoise(
    signal: np.ndarray, levels: int = 2, wavelet: str = "db4", window: int = 64
) -> np.ndarray:
    """Causal denoise: output[t] is the last sample of the denoised window
    ending at t, so no future data leaks into the feature.

    Early samples whose history is shorter than the transform's minimum
    length are passed through unchanged.
    """
    x = np.asarray(signal, dtype=np.float64)
    lo, _ = _filters(wavelet)
    min_len = max(2**levels, len(lo) - 1)
    if window < min_len:
        raise ValueError(f"window {window} below transform minimum {min_len}")
    out = x.copy()
    for t in range(len(x)):
        lo_idx = max(0, t + 1 - window)
        seg = x[lo_idx : t + 1]
        if len(seg) < min_len:
            continue
        out[t] = denoise_series(seg, levels, wavelet)[-1]
    return out


def add_denoised_channel(
    series: PriceSeries, levels: int = 2, wavelet: str = "db4", window: int = 64
) -> PriceSeries:
    """Append a causally denoised close channel (``close_denoised``).

    Cash stays exactly constant.  Denoised values are floored at a tiny
    positive fraction of the asset's minimum close so the strictly
    positive price invariant cannot be violated by shrinkage overshoot.
    """
    name = "close" + DENOISED_SUFFIX
    if name in series.feature_names:
        return series
    closes = series.closes
    channel = np.empty_like(closes)
    for i in range(series.num_assets):
        if i == series.cash_index:
            channel[i] = closes[i]
            continue
        den = rolling_denoise(closes[i], levels, wavelet, window)
        floor = 1e-6 * float(closes[i].min())
        channel[i] = np.maximum(den, floor)
    prices = np.concatenate([series.prices, channel[:, :, None]], axis=2)
    return series.with_features((*series.feature_names, name), prices)
