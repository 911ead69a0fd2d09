"""Autocorrelation of returns and of their absolute values.

The raw-return correlogram checks serial independence; the absolute-
return correlogram exposes volatility memory, its daily periodic part
and, via :func:`intraday_volatility_profile`, the intraday activity
pattern behind it.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import signal

from ._validation import check_series
from .ingest import ReturnSeries

__all__ = [
    "Transform",
    "Correlogram",
    "DailyPattern",
    "acf",
    "daily_pattern",
    "intraday_volatility_profile",
]

BAND_Z = 1.96


class Transform(str, enum.Enum):
    RAW = "raw"
    ABSOLUTE = "absolute"
    SQUARED = "squared"

    @classmethod
    def parse(cls, value) -> "Transform":
        if isinstance(value, cls):
            return value
        aliases = {"abs": "absolute", "sq": "squared", "square": "squared"}
        value = str(value).lower()
        try:
            return cls(aliases.get(value, value))
        except ValueError:
            raise ValueError(f"unknown transform {value!r}") from None

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self is Transform.ABSOLUTE:
            return np.abs(x)
        if self is Transform.SQUARED:
            return x * x
        return x


@dataclass
class Correlogram:
    lags: np.ndarray
    values: np.ndarray
    n: int
    transform: Transform

    @property
    def band(self) -> float:
        return BAND_Z / np.sqrt(self.n)

    def fraction_outside(self, lo: int = 1, hi: int = None) -> float:
        hi = self.lags[-1] if hi is None else hi
        sel = (self.lags >= lo) & (self.lags <= hi)
        return float(np.mean(np.abs(self.values[sel]) > self.band))

    def to_rows(self):
        band = float(self.band)
        for k, v in zip(self.lags, self.values):
            yield int(k), float(v), band


def _lagged_products(z: np.ndarray, max_lag: int) -> np.ndarray:
    full = signal.correlate(z, z, mode="full", method="auto")
    mid = z.size - 1
    out = np.zeros(max_lag + 1)
    m = min(max_lag, z.size - 1)
    out[: m + 1] = full[mid:mid + m + 1]
    return out


def acf(series, max_lag: int, transform=Transform.RAW, exclude_cross_day: bool = False) -> Correlogram:
    """Biased sample autocorrelation up to ``max_lag``.

    rho(k) = sum_t (y_t - m)(y_{t+k} - m) / sum_t (y_t - m)^2 with ``y`` the
    transformed series. With ``exclude_cross_day`` (ReturnSeries input)
    products pairing different days are dropped from the numerator.
    """
    transform = Transform.parse(transform)
    blocks = None
    if isinstance(series, ReturnSeries):
        blocks = series.blocks
        x = series.flatten()
    else:
        x = check_series(series)
        if exclude_cross_day:
            raise ValueError("exclude_cross_day needs a day-partitioned ReturnSeries")
    n = x.size
    max_lag = int(max_lag)
    if max_lag < 0 or max_lag >= n / 2:
        raise ValueError(f"max_lag must lie in [0, N/2) = [0, {n / 2}), got {max_lag}")
    y = transform.apply(x)
    mean = y.mean()
    z = y - mean
    denom = float(z @ z)
    if denom <= 0 or not np.isfinite(denom):
        raise ValueError("zero-variance series has no autocorrelation")
    if exclude_cross_day:
        num = np.zeros(max_lag + 1)
        for b in blocks:
            if b.size:
                num += _lagged_products(transform.apply(b) - mean, max_lag)
    else:
        num = _lagged_products(z, max_lag)
    values = num / denom
    values[0] = 1.0
    return Correlogram(np.arange(max_lag + 1), values, n, transform)


@dataclass
class DailyPattern:
    """ACF at multiples of the day length.

    ``prominence`` is the height above the mean ACF over the surrounding
    ``±window`` lags (the peak itself excluded); ``is_peak`` marks lags
    that are the maximum of that neighbourhood.
    """

    lags: np.ndarray
    heights: np.ndarray
    prominence: np.ndarray
    is_peak: np.ndarray
    day_length: int
    window: int

    def ratio_to(self, reference: "DailyPattern") -> float:
        """Mean prominence relative to ``reference`` (< 1 means attenuated)."""
        return float(np.mean(self.prominence) / np.mean(reference.prominence))


def daily_pattern(correlogram: Correlogram, day_length: int, window: int = None) -> DailyPattern:
    day_length = int(day_length)
    max_lag = int(correlogram.lags[-1])
    if day_length <= 0:
        raise ValueError("day_length must be positive")
    if max_lag < 2 * day_length:
        raise ValueError(f"max_lag {max_lag} < 2 * day_length {2 * day_length}")
    window = max(2, day_length // 20) if window is None else int(window)
    values = correlogram.values
    lags = np.arange(day_length, max_lag - window + 1, day_length)
    heights = values[lags]
    prominence = np.empty(lags.size)
    is_peak = np.empty(lags.size, dtype=bool)
    for i, k in enumerate(lags):
        hood = values[k - window:k + window + 1]
        others = np.delete(hood, window)
        prominence[i] = values[k] - others.mean()
        is_peak[i] = values[k] >= others.max()
    return DailyPattern(lags, heights, prominence, is_peak, day_length, window)


def intraday_volatility_profile(series: ReturnSeries) -> np.ndarray:
    """Mean absolute return in each intraday slot, averaged over days."""
    if not isinstance(series, ReturnSeries) or series.n_days == 0:
        raise ValueError("need a non-empty day-partitioned ReturnSeries")
    lengths = series.day_lengths
    common = int(lengths.min())
    if not series.is_uniform:
        warnings.warn(f"ragged days; using the common first {common} slots", stacklevel=2)
    stacked = np.vstack([b[:common] for b in series.blocks])
    return np.abs(stacked).mean(axis=0)
