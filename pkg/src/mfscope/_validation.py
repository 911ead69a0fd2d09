"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils import check_array


class DegenerateInputError(ValueError):
    """Raised when a series carries no fluctuation to analyse."""


def check_series(x, *, min_length: int = 1, name: str = "series") -> np.ndarray:
    """Return ``x`` as a finite 1-D float64 array of at least ``min_length`` points."""
    if hasattr(x, "flatten") and not isinstance(x, np.ndarray):
        # ReturnSeries and friends expose flatten()
        x = x.flatten()
    arr = check_array(x, ensure_2d=False, dtype=np.float64, copy=False,
                      ensure_all_finite=True, ensure_min_samples=0)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < min_length:
        raise ValueError(f"{name} needs at least {min_length} points, got {arr.size}")
    return arr


def check_q_grid(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64).ravel()
    if q.size == 0:
        raise ValueError("q grid is empty")
    if not np.all(np.isfinite(q)):
        raise ValueError("q grid contains non-finite values")
    if q.size > 1 and np.any(np.diff(q) <= 0):
        raise ValueError("q grid must be strictly increasing")
    return q


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator from an integer seed, SeedSequence or Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("a seed is required; unseeded runs are not reproducible")
    return np.random.Generator(np.random.PCG64(seed))


RNG_ALGORITHM = "numpy.PCG64 via SeedSequence"
