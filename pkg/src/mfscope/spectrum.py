"""Singularity spectrum from partition-function exponents.

``alpha_q = d tau / d q`` and ``f(alpha_q) = q alpha_q - tau(q)``. The
same curve is the lower envelope of the lines ``y = q alpha - tau(q)``;
both constructions are provided so one can check the other.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_q_grid, check_series

__all__ = [
    "SingularitySpectrum",
    "SpectrumSummary",
    "legendre_points",
    "envelope",
    "spectrum_summary",
    "alpha_samples",
]

ALPHA_MONOTONE_TOL = 1e-10


@dataclass
class SpectrumSummary:
    alpha_min: float
    alpha_max: float
    alpha0: float
    f_max: float
    width: float
    asymmetry: float
    refined: bool = True

    def as_dict(self) -> dict:
        return {k: (float(v) if not isinstance(v, bool) else v)
                for k, v in self.__dict__.items()}


@dataclass
class SingularitySpectrum:
    """Points (alpha_q, f(alpha_q)) ordered by q, with their summary.

    ``alpha_min``/``alpha_max`` are reached at the ends of the q grid, so
    they depend on the configured q range.
    """

    q: np.ndarray
    tau: np.ndarray
    alpha: np.ndarray
    f: np.ndarray
    summary: SpectrumSummary = None
    nonconcave_q: list = field(default_factory=list)

    @property
    def width(self) -> float:
        return self.summary.width

    @property
    def alpha0(self) -> float:
        return self.summary.alpha0

    def reconstruct_tau(self) -> np.ndarray:
        return self.q * self.alpha - self.f

    def to_rows(self):
        for qi, a, fa in zip(self.q, self.alpha, self.f):
            yield float(qi), float(a), float(fa)


def _as_q_tau(exponents, tau=None):
    if tau is None:
        q, tau = exponents.q, exponents.tau
    else:
        q = exponents
    q = check_q_grid(q)
    tau = np.asarray(tau, dtype=np.float64)
    if tau.shape != q.shape:
        raise ValueError(f"tau has shape {tau.shape}, q grid has shape {q.shape}")
    return q, tau


def legendre_points(exponents, tau=None) -> SingularitySpectrum:
    """Legendre transform of tau(q) on its grid.

    Accepts a ``ScalingExponents`` or a pair ``(q, tau)``. Derivatives are
    central differences, one-sided at the grid ends. A tau that is not
    concave still yields a spectrum, with a warning naming the q values
    where alpha fails to decrease.
    """
    q, tau = _as_q_tau(exponents, tau)
    keep = np.isfinite(tau)
    if np.count_nonzero(keep) < 5:
        raise ValueError("need tau on at least 5 q points")
    q, tau = q[keep], tau[keep]
    alpha = np.gradient(tau, q)
    f = q * alpha - tau
    bad = np.flatnonzero(np.diff(alpha) > ALPHA_MONOTONE_TOL)
    nonconcave = sorted({float(q[i]) for i in bad} | {float(q[i + 1]) for i in bad})
    if nonconcave:
        warnings.warn(f"tau(q) is not concave; alpha increases near q = {nonconcave}",
                      RuntimeWarning, stacklevel=2)
    spec = SingularitySpectrum(q=q, tau=tau, alpha=alpha, f=f, nonconcave_q=nonconcave)
    spec.summary = spectrum_summary(spec)
    return spec


def spectrum_summary(spectrum: SingularitySpectrum) -> SpectrumSummary:
    alpha, f = np.asarray(spectrum.alpha), np.asarray(spectrum.f)
    if alpha.size == 0:
        raise ValueError("empty spectrum")
    a_min, a_max = float(alpha.min()), float(alpha.max())
    k = int(np.argmax(f))
    alpha0, f_max = float(alpha[k]), float(f[k])
    refined = False
    if alpha.size >= 3 and 0 < k < alpha.size - 1:
        x = alpha[k - 1:k + 2]
        y = f[k - 1:k + 2]
        if np.all(np.diff(x) != 0):
            c2, c1, c0 = np.polyfit(x, y, 2)
            if c2 < 0:
                vertex = -c1 / (2 * c2)
                if x.min() <= vertex <= x.max():
                    alpha0 = float(vertex)
                    f_max = float(c0 - c1 ** 2 / (4 * c2))
                    refined = True
    elif alpha.size < 3:
        warnings.warn("fewer than 3 spectrum points; alpha0 not refined",
                      RuntimeWarning, stacklevel=2)
    return SpectrumSummary(alpha_min=a_min, alpha_max=a_max, alpha0=alpha0, f_max=f_max,
                           width=a_max - a_min,
                           asymmetry=(a_max - alpha0) - (alpha0 - a_min),
                           refined=refined)


def alpha_samples(spectrum: SingularitySpectrum, n: int = 201, margin: float = 0.05) -> np.ndarray:
    lo = spectrum.summary.alpha_min - margin
    hi = spectrum.summary.alpha_max + margin
    return np.linspace(lo, hi, n)


def envelope(exponents, alphas, tau=None) -> np.ndarray:
    """min over q of ``q * alpha - tau(q)`` at each sampled alpha."""
    q, tau = _as_q_tau(exponents, tau)
    keep = np.isfinite(tau)
    q, tau = q[keep], tau[keep]
    alphas = check_series(alphas, name="alpha samples")
    lines = np.outer(alphas, q) - tau[None, :]
    return lines.min(axis=1)
