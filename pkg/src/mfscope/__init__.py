"""Multifractal detrended fluctuation analysis of intraday return series."""

__version__ = "0.1.0"

from ._validation import DegenerateInputError
from .correl import Correlogram, Transform, acf, daily_pattern, intraday_volatility_profile
from .ingest import (FormatConfig, ReturnSeries, SessionConfig, TickSeries, log_returns,
                     parse_ticks, read_returns, resample, write_returns)
from .mfdfa import MFDFA, fit_h, fluctuation, partition_function_oracle, profile
from .spectrum import SingularitySpectrum, envelope, legendre_points, spectrum_summary
from .surrogate import ShuffleKind, SurrogateTest, d_statistic, shuffle, surrogate_test
from .synth import (CascadeSpec, FgnSpec, analytic_tau_cascade, generate_binomial_cascade,
                    generate_fgn, generate_gaussian_iid)

__all__ = [
    "MFDFA", "SurrogateTest", "ShuffleKind", "Transform", "DegenerateInputError",
    "FormatConfig", "SessionConfig", "TickSeries", "ReturnSeries",
    "parse_ticks", "resample", "log_returns", "read_returns", "write_returns",
    "profile", "fluctuation", "fit_h", "partition_function_oracle",
    "SingularitySpectrum", "legendre_points", "envelope", "spectrum_summary",
    "shuffle", "d_statistic", "surrogate_test",
    "Correlogram", "acf", "daily_pattern", "intraday_volatility_profile",
    "FgnSpec", "CascadeSpec", "generate_gaussian_iid", "generate_fgn",
    "generate_binomial_cascade", "analytic_tau_cascade",
]
