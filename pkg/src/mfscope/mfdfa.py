"""Multifractal detrended fluctuation analysis.

The estimator integrates the demeaned series into a profile, cuts the
profile into non-overlapping windows of size ``s`` (from both ends by
default), removes an order-``m`` least-squares polynomial from every
window and averages the residual variances with a q-power mean. The
slope of ``ln F_q(s)`` against ``ln s`` is the generalized Hurst
exponent ``h(q)``, and ``tau(q) = q h(q) - 1``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import DegenerateInputError, check_positive_int, check_q_grid, check_series

__all__ = [
    "DEFAULT_Q",
    "MFDFA",
    "FluctuationSurface",
    "ScalingExponents",
    "PartitionEstimate",
    "default_scales",
    "profile",
    "segment",
    "segment_rms",
    "segment_variances",
    "fluctuation",
    "fit_h",
    "partition_function_oracle",
]

DEFAULT_Q = np.round(np.arange(-5.0, 5.0 + 1e-9, 0.25), 10)
Q_ZERO_TOL = 1e-8


@dataclass
class FluctuationSurface:
    """F_q(s) on a (q, s) grid.

    ``n_segments[j]`` is the number of windows at ``scales[j]``;
    ``n_zero[j]`` counts windows whose residual vanished exactly (they are
    left out of the q <= 0 means).
    """

    q: np.ndarray
    scales: np.ndarray
    values: np.ndarray
    n_segments: np.ndarray
    n_zero: np.ndarray

    def to_rows(self):
        for i, qi in enumerate(self.q):
            for j, s in enumerate(self.scales):
                yield float(qi), int(s), float(self.values[i, j])


@dataclass
class ScalingExponents:
    q: np.ndarray
    h: np.ndarray
    tau: np.ndarray
    h_stderr: np.ndarray
    r2: np.ndarray
    intercept: np.ndarray
    fit_range: tuple
    failed: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.failed is None:
            self.failed = np.zeros(self.q.shape, dtype=bool)

    def to_rows(self):
        for i in range(self.q.size):
            yield (float(self.q[i]), float(self.h[i]), float(self.h_stderr[i]),
                   float(self.tau[i]), float(self.r2[i]))


@dataclass
class PartitionEstimate:
    q: np.ndarray
    tau: np.ndarray
    depths: np.ndarray
    n_excluded: np.ndarray


def default_scales(n: int, order: int = 5, n_scales: int = 30,
                   min_scale: int = 16, max_fraction: float = 0.25) -> np.ndarray:
    """Log-spaced integer window sizes between ``min_scale`` and ``n * max_fraction``."""
    lo = max(min_scale, order + 2)
    hi = int(np.floor(n * max_fraction))
    if hi < lo:
        raise ValueError(f"series of length {n} is too short for scales >= {lo}")
    scales = np.unique(np.round(np.geomspace(lo, hi, n_scales)).astype(np.int64))
    return scales


def profile(x) -> np.ndarray:
    """Cumulative sum of the demeaned series."""
    x = check_series(x, min_length=4)
    y = np.cumsum(x - x.mean())
    if not np.any(y) or np.ptp(x) == 0:
        raise DegenerateInputError("constant series has an identically zero profile")
    return y


def segment(n: int, s: int, both_ends: bool = True) -> list[slice]:
    """Non-overlapping windows of length ``s``, from the start and optionally the end."""
    if s > n:
        raise ValueError(f"window {s} exceeds series length {n}")
    if s < 4:
        raise ValueError(f"window must have at least 4 points, got {s}")
    k = n // s
    windows = [slice(i * s, (i + 1) * s) for i in range(k)]
    if both_ends:
        windows += [slice(n - (i + 1) * s, n - i * s) for i in range(k)]
    return windows


@lru_cache(maxsize=256)
def _detrend_basis(s: int, order: int) -> np.ndarray:
    # orthonormal basis of polynomials of degree <= order on a centred, scaled abscissa
    x = np.linspace(-1.0, 1.0, s)
    basis, _ = np.linalg.qr(np.vander(x, order + 1, increasing=True))
    basis.setflags(write=False)
    return basis


def _residuals(windows: np.ndarray, order: int) -> np.ndarray:
    basis = _detrend_basis(windows.shape[-1], order)
    res = windows - (windows @ basis) @ basis.T
    # second projection pass removes the rounding left by the first
    res -= (res @ basis) @ basis.T
    return res


def segment_rms(window, order: int) -> float:
    """Root-mean-square residual of an order-``order`` polynomial fit."""
    w = check_series(window, name="window")
    if w.size < order + 2:
        raise ValueError(f"window of {w.size} points cannot be detrended at order {order}")
    res = _residuals(w[None, :], order)[0]
    return float(np.sqrt(np.mean(res ** 2)))


def segment_variances(y: np.ndarray, s: int, order: int, both_ends: bool = True) -> np.ndarray:
    """Squared residual RMS F^2(nu, s) for every window at scale ``s``."""
    n = y.size
    if s > n:
        raise ValueError(f"window {s} exceeds series length {n}")
    k = n // s
    blocks = [y[: k * s].reshape(k, s)]
    if both_ends:
        blocks.append(y[n - k * s:].reshape(k, s)[::-1])
    windows = np.concatenate(blocks, axis=0)
    res = _residuals(windows, order)
    return np.mean(res ** 2, axis=1)


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    top = a.max(axis=1)
    return top + np.log(np.exp(a - top[:, None]).sum(axis=1))


def _power_mean(f2: np.ndarray, q: float) -> float:
    """q-power mean of sqrt(f2); the log mean at q == 0."""
    return float(_power_means(f2, np.array([q]))[0])


def _power_means(f2: np.ndarray, q: np.ndarray) -> np.ndarray:
    """q-power means of sqrt(f2) for every q; zero windows only enter q > 0."""
    out = np.empty(q.size)
    pos = f2[f2 > 0]
    with np.errstate(divide="ignore"):
        log_all = np.log(f2)
    log_pos = np.log(pos)
    zero_q = np.abs(q) < Q_ZERO_TOL
    positive = q > Q_ZERO_TOL
    negative = ~(zero_q | positive)
    if positive.any():
        qp = q[positive]
        out[positive] = np.exp((_logsumexp_rows(0.5 * np.outer(qp, log_all))
                                - np.log(f2.size)) / qp)
    if pos.size == 0:
        out[~positive] = np.nan
        return out
    if negative.any():
        qn = q[negative]
        out[negative] = np.exp((_logsumexp_rows(0.5 * np.outer(qn, log_pos))
                                - np.log(pos.size)) / qn)
    out[zero_q] = np.exp(0.5 * np.mean(log_pos))
    return out


def fluctuation_from_variances(variances: list, q, scales) -> FluctuationSurface:
    q = check_q_grid(q)
    scales = np.asarray(scales, dtype=np.int64)
    values = np.empty((q.size, scales.size))
    n_seg = np.empty(scales.size, dtype=np.int64)
    n_zero = np.empty(scales.size, dtype=np.int64)
    for j, f2 in enumerate(variances):
        n_seg[j] = f2.size
        n_zero[j] = int(np.count_nonzero(f2 == 0))
        if n_zero[j] == f2.size:
            raise DegenerateInputError(f"every window at scale {scales[j]} has zero residual")
        values[:, j] = _power_means(f2, q)
    return FluctuationSurface(q=q, scales=scales, values=values,
                              n_segments=n_seg, n_zero=n_zero)


def fluctuation(y, q=DEFAULT_Q, scales=None, order: int = 5,
                both_ends: bool = True) -> FluctuationSurface:
    """F_q(s) of a profile ``y``.

    Window variances at each scale are computed once and shared by all q.
    """
    y = check_series(y, min_length=4, name="profile")
    if scales is None:
        scales = default_scales(y.size, order)
    scales = np.asarray(scales, dtype=np.int64)
    if scales.size and scales.min() < order + 2:
        raise ValueError(f"smallest scale {scales.min()} < order + 2 = {order + 2}")
    variances = [segment_variances(y, int(s), order, both_ends) for s in scales]
    return fluctuation_from_variances(variances, q, scales)


def _ols(x: np.ndarray, y: np.ndarray):
    n = x.size
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = np.sum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    sse = float(resid @ resid)
    sst = float(np.sum((y - ym) ** 2))
    r2 = 1.0 - sse / sst if sst > 0 else 1.0
    stderr = np.sqrt(sse / (n - 2) / sxx) if n > 2 else np.nan
    return slope, intercept, stderr, r2


def fit_h(surface: FluctuationSurface, fit_range=None, min_points: int = 5) -> ScalingExponents:
    """Least-squares slope of ln F_q(s) on ln s for every q."""
    scales = surface.scales
    lo, hi = (scales.min(), scales.max()) if fit_range is None else fit_range
    in_range = (scales >= lo) & (scales <= hi)
    nq = surface.q.size
    h = np.full(nq, np.nan)
    se = np.full(nq, np.nan)
    r2 = np.full(nq, np.nan)
    icpt = np.full(nq, np.nan)
    failed = np.zeros(nq, dtype=bool)
    log_s = np.log(scales.astype(np.float64))
    for i in range(nq):
        f = surface.values[i]
        ok = in_range & np.isfinite(f) & (f > 0)
        if np.count_nonzero(ok) < min_points:
            failed[i] = True
            continue
        h[i], icpt[i], se[i], r2[i] = _ols(log_s[ok], np.log(f[ok]))
    if failed.any():
        warnings.warn(f"scaling fit failed for q = {surface.q[failed].tolist()}",
                      RuntimeWarning, stacklevel=2)
    tau = surface.q * h - 1.0
    return ScalingExponents(q=surface.q.copy(), h=h, tau=tau, h_stderr=se, r2=r2,
                            intercept=icpt, fit_range=(int(lo), int(hi)), failed=failed)


def partition_function_oracle(series, q=DEFAULT_Q, depths=None,
                              length_policy: str = "trim") -> PartitionEstimate:
    """tau(q) from dyadic box sums, Z_q(eps) = sum |box sum|^q ~ eps^tau(q).

    The series is read as increments on [0, 1]; depth ``j`` uses ``2**j``
    boxes of size ``eps = 2**-j``. Intended for cross-checking MF-DFA on
    measures such as cascades, not for production estimation.
    """
    x = check_series(series, min_length=2)
    q = check_q_grid(q)
    n_levels = int(np.floor(np.log2(x.size)))
    if 2 ** n_levels != x.size:
        if length_policy == "trim":
            x = x[: 2 ** n_levels]
        elif length_policy == "pad":
            n_levels += 1
            x = np.concatenate([x, np.zeros(2 ** n_levels - x.size)])
        else:
            raise ValueError(f"series length {x.size} is not a power of two")
    depths = np.arange(1, n_levels + 1) if depths is None else np.asarray(depths, dtype=np.int64)
    if depths.size < 2 or depths.min() < 0 or depths.max() > n_levels:
        raise ValueError(f"depths must be >= 2 values in [0, {n_levels}]")
    log_z = np.empty((q.size, depths.size))
    excluded = np.zeros(depths.size, dtype=np.int64)
    for j, d in enumerate(depths):
        boxes = np.abs(x.reshape(2 ** int(d), -1).sum(axis=1))
        pos = boxes[boxes > 0]
        excluded[j] = boxes.size - pos.size
        log_z[:, j] = _logsumexp_rows(np.outer(q, np.log(pos)))
    log_eps = -depths * np.log(2.0)
    tau = np.array([_ols(log_eps, log_z[i])[0] for i in range(q.size)])
    return PartitionEstimate(q=q, tau=tau, depths=depths, n_excluded=excluded)


class MFDFA(BaseEstimator):
    """Multifractal detrended fluctuation analysis estimator.

    Parameters
    ----------
    q : array-like, optional
        Moment orders, strictly increasing. Defaults to -5..5 in steps of 0.25.
    scales : array-like of int, optional
        Window sizes. Defaults to 30 log-spaced sizes from ``min_scale`` to N/4.
    order : int, default 5
        Degree of the detrending polynomial.
    both_ends : bool, default True
        Also segment the profile from its end so that no tail is discarded.
    fit_range : (int, int), optional
        Restrict the log-log regression to scales in this closed range.
    min_scale : int, default 16
        Smallest default scale (ignored when ``scales`` is given).
    n_scales : int, default 30

    Attributes
    ----------
    fluctuation_ : FluctuationSurface
    exponents_ : ScalingExponents
    h_, tau_ : ndarray
    spectrum_ : SingularitySpectrum
    n_samples_ : int
    """

    def __init__(self, q=None, scales=None, order=5, both_ends=True, fit_range=None,
                 min_scale=16, n_scales=30):
        self.q = q
        self.scales = scales
        self.order = order
        self.both_ends = both_ends
        self.fit_range = fit_range
        self.min_scale = min_scale
        self.n_scales = n_scales

    def _resolved_q(self):
        q = DEFAULT_Q if self.q is None else self.q
        return check_q_grid(q)

    def _resolved_scales(self, n):
        if self.scales is None:
            return default_scales(n, self.order, self.n_scales, self.min_scale)
        scales = np.unique(np.asarray(self.scales, dtype=np.int64))
        if scales.min() < self.order + 2:
            raise ValueError(f"smallest scale {scales.min()} < order + 2")
        if scales.max() > n // 4:
            raise ValueError(f"largest scale {scales.max()} exceeds N/4 = {n // 4}")
        return scales

    def fit(self, X, y=None):
        from .spectrum import legendre_points

        order = check_positive_int(self.order, "order", minimum=0)
        x = check_series(X, min_length=4)
        q = self._resolved_q()
        scales = self._resolved_scales(x.size)
        prof = profile(x)
        self.fluctuation_ = fluctuation(prof, q, scales, order, self.both_ends)
        self.exponents_ = fit_h(self.fluctuation_, self.fit_range)
        self.h_ = self.exponents_.h
        self.tau_ = self.exponents_.tau
        self.n_samples_ = x.size
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            self.spectrum_ = legendre_points(self.exponents_) if q.size >= 5 else None
        return self

    def hurst(self) -> float:
        """h(2), the DFA Hurst exponent (q = 2 must be on the grid)."""
        check_is_fitted(self, "exponents_")
        idx = np.flatnonzero(np.isclose(self.exponents_.q, 2.0))
        if idx.size == 0:
            raise ValueError("q = 2 is not on the configured grid")
        return float(self.h_[idx[0]])
