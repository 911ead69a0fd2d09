"""Shuffled-surrogate tests for the origin of multifractality.

A permutation keeps the distribution of returns and destroys (some of)
their temporal order. Comparing the distance ``d`` of an observed tau(q)
from the i.i.d. line ``q/2 - 1`` with its distribution over surrogates
tells whether the multifractality is carried by correlations or by the
distribution alone.
"""

from __future__ import annotations

import enum
import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, clone

from ._validation import RNG_ALGORITHM, check_series
from .ingest import ReturnSeries
from .mfdfa import MFDFA

__all__ = [
    "ShuffleKind",
    "SurrogateReport",
    "SurrogateFailure",
    "SurrogateTest",
    "shuffle",
    "d_statistic",
    "surrogate_test",
    "empirical_p_value",
]

MAX_FAILURE_FRACTION = 0.01
REPORT_PERCENTILES = (99.0, 99.9)


class ShuffleKind(str, enum.Enum):
    FULL = "full"
    INTRADAY = "intraday"
    DAILY = "daily"

    @classmethod
    def parse(cls, value) -> "ShuffleKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown shuffle kind {value!r}; "
                             f"expected one of {[k.value for k in cls]}") from None


class SurrogateFailure(RuntimeError):
    """Too many surrogate pipelines failed for the ensemble to be trusted."""


def shuffle(series, kind=ShuffleKind.FULL, seed=0):
    """Permute a return series.

    FULL permutes all returns across days; INTRADAY permutes within each
    day, keeping the day order; DAILY permutes whole days. Plain arrays
    only support FULL. The day-``i`` permutation for INTRADAY is drawn
    from child ``i`` of ``SeedSequence(seed)``, so results do not depend
    on how days are scheduled.
    """
    kind = ShuffleKind.parse(kind)
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    if not isinstance(series, ReturnSeries):
        x = check_series(series, min_length=1)
        if kind is not ShuffleKind.FULL:
            raise ValueError(f"{kind.value} shuffle needs a day-partitioned ReturnSeries")
        return np.random.Generator(np.random.PCG64(seq)).permutation(x)
    if len(series) == 0:
        raise ValueError("cannot shuffle an empty series")
    if kind is ShuffleKind.FULL:
        flat = np.random.Generator(np.random.PCG64(seq)).permutation(series.flatten())
        cuts = np.cumsum(series.day_lengths)[:-1]
        return series.with_blocks(np.split(flat, cuts))
    if kind is ShuffleKind.INTRADAY:
        children = seq.spawn(series.n_days)
        blocks = [np.random.Generator(np.random.PCG64(c)).permutation(b)
                  for c, b in zip(children, series.blocks)]
        return series.with_blocks(blocks)
    order = np.random.Generator(np.random.PCG64(seq)).permutation(series.n_days)
    # DAILY keeps the calendar: day slot i receives the returns of day order[i]
    return series.with_blocks([series.blocks[i] for i in order])


def d_statistic(exponents, tau=None) -> float:
    """l2 distance of tau(q) from the i.i.d. finite-variance line q/2 - 1."""
    if tau is None:
        q, tau = exponents.q, exponents.tau
    else:
        q = exponents
    q = np.asarray(q, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    ok = np.isfinite(tau)
    if not ok.any():
        raise ValueError("no finite tau values")
    if not ok.all():
        warnings.warn(f"ignoring non-finite tau at q = {q[~ok].tolist()}",
                      RuntimeWarning, stacklevel=2)
    dev = tau[ok] - (q[ok] / 2.0 - 1.0)
    return float(np.sqrt(np.sum(dev ** 2)))


def empirical_p_value(d_obs: float, ensemble) -> float:
    """(1 + #{d_surr >= d_obs}) / (M + 1)."""
    ensemble = np.asarray(ensemble, dtype=np.float64)
    return (1.0 + np.count_nonzero(ensemble >= d_obs)) / (ensemble.size + 1.0)


@dataclass
class SurrogateReport:
    d_observed: float
    n_surrogates: int
    n_failed: int
    mean: float
    std: float
    min: float
    max: float
    percentiles: dict
    p_value: float
    p_value_text: str
    seed: int
    kind: str
    q: list
    rng: str = RNG_ALGORITHM
    config: dict = field(default_factory=dict)
    ensemble: list = field(default_factory=list, repr=False)

    def to_dict(self, include_ensemble: bool = False) -> dict:
        out = asdict(self)
        if not include_ensemble:
            out.pop("ensemble")
        return out

    def to_json(self, include_ensemble: bool = False) -> str:
        return json.dumps(self.to_dict(include_ensemble), indent=2, sort_keys=True)


def _series_d(x, estimator) -> float:
    return d_statistic(clone(estimator).fit(x).exponents_)


def _one_surrogate(series, kind, child, estimator):
    surrogate = shuffle(series, kind, child)
    x = surrogate.flatten() if isinstance(surrogate, ReturnSeries) else surrogate
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return _series_d(x, estimator), None
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return np.nan, f"{type(exc).__name__}: {exc}"


def surrogate_test(series, kind=ShuffleKind.FULL, n_surrogates: int = 100,
                   estimator=None, seed: int = 0, n_jobs: int = 1) -> SurrogateReport:
    """Run the MF-DFA -> tau -> d pipeline on a series and on shuffled copies.

    Surrogate ``i`` uses child ``i`` of ``SeedSequence(seed)``, and results
    are merged in index order, so the report does not depend on ``n_jobs``.
    """
    kind = ShuffleKind.parse(kind)
    if n_surrogates < 100:
        raise ValueError(f"need at least 100 surrogates, got {n_surrogates}")
    if seed is None:
        raise ValueError("a seed is required")
    estimator = MFDFA() if estimator is None else estimator
    if isinstance(series, ReturnSeries):
        if kind is not ShuffleKind.FULL and series.n_days < 2:
            raise ValueError(f"{kind.value} shuffle needs at least 2 days, got {series.n_days}")
        x = series.flatten()
    else:
        x = check_series(series, min_length=4)
        series = x
    d_obs = _series_d(x, estimator)
    children = np.random.SeedSequence(seed).spawn(n_surrogates)
    results = Parallel(n_jobs=n_jobs)(
        delayed(_one_surrogate)(series, kind, c, estimator) for c in children)
    ens = np.array([r[0] for r in results])
    errors = [r[1] for r in results if r[1] is not None]
    if len(errors) > MAX_FAILURE_FRACTION * n_surrogates:
        raise SurrogateFailure(f"{len(errors)} of {n_surrogates} surrogates failed; "
                               f"first error: {errors[0]}")
    if errors:
        warnings.warn(f"{len(errors)} surrogate(s) failed and were excluded", RuntimeWarning,
                      stacklevel=2)
    good = ens[np.isfinite(ens)]
    p = empirical_p_value(d_obs, good)
    p_text = f"< {1.0 / good.size:.3g}" if np.all(good < d_obs) else f"{p:.6g}"
    q = clone(estimator)._resolved_q() if hasattr(estimator, "_resolved_q") else []
    return SurrogateReport(
        d_observed=float(d_obs),
        n_surrogates=int(n_surrogates),
        n_failed=len(errors),
        mean=float(good.mean()),
        std=float(good.std(ddof=1)),
        min=float(good.min()),
        max=float(good.max()),
        percentiles={str(p_): float(np.percentile(good, p_)) for p_ in REPORT_PERCENTILES},
        p_value=float(p),
        p_value_text=p_text,
        seed=int(seed),
        kind=kind.value,
        q=[float(v) for v in q],
        config={k: _jsonable(v) for k, v in estimator.get_params().items()},
        ensemble=[float(v) for v in ens],
    )


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    if isinstance(value, tuple):
        return list(value)
    return value


class SurrogateTest(BaseEstimator):
    """Estimator wrapper around :func:`surrogate_test`.

    Parameters
    ----------
    kind : {"full", "intraday", "daily"}
    n_surrogates : int
    estimator : MFDFA, optional
        Configuration applied identically to the series and every surrogate.
    seed : int
    n_jobs : int
    """

    def __init__(self, kind="full", n_surrogates=100, estimator=None, seed=0, n_jobs=1):
        self.kind = kind
        self.n_surrogates = n_surrogates
        self.estimator = estimator
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        self.report_ = surrogate_test(X, self.kind, self.n_surrogates, self.estimator,
                                      self.seed, self.n_jobs)
        self.d_observed_ = self.report_.d_observed
        self.p_value_ = self.report_.p_value
        self.ensemble_ = np.asarray(self.report_.ensemble)
        return self
