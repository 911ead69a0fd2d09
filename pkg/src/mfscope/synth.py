"""Synthetic series with known scaling exponents.

These are the reference processes the estimators are checked against:
white Gaussian noise (h(q) = 1/2), fractional Gaussian noise (h(q) = H)
and the deterministic / randomly placed binomial cascade, whose
partition-function exponents are known in closed form.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._validation import check_positive_int, make_rng

__all__ = [
    "FgnSpec",
    "CascadeSpec",
    "generate_gaussian_iid",
    "generate_fgn",
    "generate_binomial_cascade",
    "analytic_tau_cascade",
    "analytic_alpha_cascade",
    "fgn_autocovariance",
]

# 2 GiB of float64 masses
DEFAULT_MEMORY_BUDGET = 2 ** 31


@dataclass(frozen=True)
class FgnSpec:
    hurst: float
    length: int
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.hurst < 1.0:
            raise ValueError(f"Hurst exponent must lie in (0, 1), got {self.hurst}")
        check_positive_int(self.length, "length", minimum=2)
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class CascadeSpec:
    multiplier: float
    levels: int
    seed: int = 0
    randomize_placement: bool = False

    def __post_init__(self):
        if not 0.0 < self.multiplier < 1.0:
            raise ValueError(f"multiplier must lie in (0, 1), got {self.multiplier}")
        check_positive_int(self.levels, "levels", minimum=1)


def generate_gaussian_iid(n: int, sigma: float = 1.0, seed=0) -> np.ndarray:
    """``n`` independent N(0, sigma^2) draws."""
    n = check_positive_int(n, "n")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return sigma * make_rng(seed).standard_normal(n)


def fgn_autocovariance(hurst: float, lags, sigma: float = 1.0) -> np.ndarray:
    """gamma(k) = sigma^2/2 (|k+1|^2H - 2|k|^2H + |k-1|^2H)."""
    k = np.abs(np.asarray(lags, dtype=np.float64))
    two_h = 2.0 * hurst
    return 0.5 * sigma ** 2 * (np.abs(k + 1) ** two_h - 2 * k ** two_h + np.abs(k - 1) ** two_h)


def _circulant_eigenvalues(hurst: float, n: int) -> np.ndarray:
    gamma = fgn_autocovariance(hurst, np.arange(n + 1))
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    return np.fft.fft(row).real


def _davies_harte(eig: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    m = eig.size  # 2n
    w = np.empty(m, dtype=np.complex128)
    w[0] = np.sqrt(eig[0] / m) * rng.standard_normal()
    w[n] = np.sqrt(eig[n] / m) * rng.standard_normal()
    k = np.arange(1, n)
    z = rng.standard_normal((n - 1, 2))
    w[k] = np.sqrt(eig[k] / (2 * m)) * (z[:, 0] + 1j * z[:, 1])
    w[m - k] = np.conj(w[k])
    return np.fft.fft(w).real[:n]


def _hosking(hurst: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Exact Durbin-Levinson recursion, O(n^2); used when embedding fails."""
    gamma = fgn_autocovariance(hurst, np.arange(n))
    z = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = z[0]
    phi = np.zeros(n)
    v = gamma[0]
    for t in range(1, n):
        prev = phi[: t - 1].copy()
        kappa = (gamma[t] - prev @ gamma[t - 1:0:-1]) / v
        phi[: t - 1] = prev - kappa * prev[::-1]
        phi[t - 1] = kappa
        v *= 1.0 - kappa ** 2
        x[t] = phi[:t] @ x[t - 1::-1] + np.sqrt(v) * z[t]
    return x


def generate_fgn(spec: FgnSpec) -> np.ndarray:
    """Exact fractional Gaussian noise by circulant embedding.

    The cumulative sum of the result is fractional Brownian motion with
    Hurst exponent ``spec.hurst``. If the embedding spectrum has a negative
    eigenvalue the exact (slow) Hosking recursion is used instead.
    """
    rng = make_rng(spec.seed)
    n = spec.length
    eig = _circulant_eigenvalues(spec.hurst, n)
    if np.min(eig) < -1e-12 * np.max(np.abs(eig)):
        warnings.warn("circulant embedding not positive; using Hosking recursion",
                      RuntimeWarning, stacklevel=2)
        return spec.sigma * _hosking(spec.hurst, n, rng)
    eig = np.clip(eig, 0.0, None)
    return spec.sigma * _davies_harte(eig, n, rng)


def generate_binomial_cascade(spec: CascadeSpec, *,
                              memory_budget: int = DEFAULT_MEMORY_BUDGET) -> np.ndarray:
    """Masses of a binomial cascade after ``spec.levels`` dyadic splits.

    Every box passes a fraction ``a`` of its mass to the left child and
    ``1 - a`` to the right one, or to a randomly chosen side when
    ``randomize_placement`` is set. The total mass is one.
    """
    n = spec.levels
    if 8 * 2 ** n > memory_budget:
        raise MemoryError(f"cascade with {n} levels needs {8 * 2 ** n} bytes, "
                          f"budget is {memory_budget}")
    a = spec.multiplier
    b = 1.0 - a
    mass = np.ones(1)
    rng = make_rng(spec.seed) if spec.randomize_placement else None
    for _ in range(n):
        if rng is None:
            left, right = a * mass, b * mass
        else:
            flip = rng.random(mass.size) < 0.5
            left = np.where(flip, a, b) * mass
            right = np.where(flip, b, a) * mass
        mass = np.column_stack([left, right]).ravel()
    return mass


def analytic_tau_cascade(a: float, q):
    """tau(q) = -log2(a^q + (1-a)^q) for the binomial cascade."""
    if not 0.0 < a < 1.0:
        raise ValueError(f"multiplier must lie in (0, 1), got {a}")
    q = np.asarray(q, dtype=np.float64)
    out = -np.log2(a ** q + (1.0 - a) ** q)
    return out if out.ndim else float(out)


def analytic_alpha_cascade(a: float, q):
    """d tau / d q of :func:`analytic_tau_cascade`."""
    q = np.asarray(q, dtype=np.float64)
    b = 1.0 - a
    num = a ** q * np.log(a) + b ** q * np.log(b)
    out = -num / ((a ** q + b ** q) * np.log(2.0))
    return out if out.ndim else float(out)
