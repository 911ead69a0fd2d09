import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mfscope._validation import DegenerateInputError
from mfscope.mfdfa import (DEFAULT_Q, MFDFA, FluctuationSurface, default_scales, fit_h,
                           fluctuation, fluctuation_from_variances, partition_function_oracle,
                           profile, segment, segment_rms, segment_variances)
from mfscope.synth import CascadeSpec, analytic_tau_cascade, generate_binomial_cascade

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


# --- profile ---------------------------------------------------------------

def test_profile_alternating():
    np.testing.assert_allclose(profile([1, -1, 1, -1]), [1, 0, 1, 0])


def test_profile_direct_evaluation():
    np.testing.assert_allclose(profile([1, 2, 3, 4.0])[:3], [-1.5, -2.0, -1.5])
    # demeaned (1, 2, 3) -> (-1, -1, 0); profile() itself wants N >= 4
    x = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(np.cumsum(x - x.mean()), [-1, -1, 0])


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(4, 300), elements=finite))
def test_profile_ends_at_zero(x):
    if np.ptp(x) == 0:
        return
    y = profile(x)
    assert abs(y[-1]) <= 1e-9 * max(1.0, np.sum(np.abs(x)))


def test_profile_rejects_constant():
    with pytest.raises(DegenerateInputError):
        profile(np.full(100, 3.0))


def test_profile_rejects_short():
    with pytest.raises(ValueError):
        profile([1.0, 2.0, 3.0])


# --- segmentation ----------------------------------------------------------

def test_segment_counts():
    assert len(segment(1000, 300)) == 6
    assert len(segment(1000, 300, both_ends=False)) == 3


def test_segment_exact_division_covers_everything():
    wins = segment(1000, 250)
    assert len(wins) == 8
    fwd = set().union(*(range(1000)[w] for w in wins[:4]))
    bwd = set().union(*(range(1000)[w] for w in wins[4:]))
    assert fwd == bwd == set(range(1000))


def test_segment_rejects_oversize_window():
    with pytest.raises(ValueError):
        segment(10, 11)


# --- detrending ------------------------------------------------------------

def test_segment_rms_linear_window():
    w = 3.0 + 0.25 * np.arange(500)
    assert segment_rms(w, 1) < 1e-9
    assert segment_rms(w, 3) < 1e-9


def test_segment_rms_quintic_window():
    i = np.arange(2000, dtype=float)
    w = 1e-12 * i ** 5 - 3e-9 * i ** 4 + 2e-6 * i ** 3 - i ** 2 / 7 + 5 * i - 2
    assert segment_rms(w, 5) < 1e-7


def test_segment_rms_matches_normal_equations(rng):
    w = rng.standard_normal(64).cumsum()
    i = np.arange(64, dtype=float)
    design = np.column_stack([np.ones(64), i, i ** 2])
    beta = np.linalg.solve(design.T @ design, design.T @ w)
    expected = np.sqrt(np.mean((w - design @ beta) ** 2))
    assert segment_rms(w, 2) == pytest.approx(expected, rel=1e-8)


def test_segment_rms_stable_on_long_windows(rng):
    w = rng.standard_normal(100_000).cumsum()
    i = np.linspace(-1, 1, w.size)
    trend = 50 * i ** 5 - 20 * i ** 3 + i
    assert segment_rms(w + 1e3 * trend, 5) == pytest.approx(segment_rms(w, 5), rel=1e-8)


def test_segment_rms_short_window_rejected():
    with pytest.raises(ValueError):
        segment_rms(np.arange(6.0), 5)


@settings(max_examples=40, deadline=None)
@given(coef=arrays(np.float64, 6, elements=st.floats(-10, 10)),
       order=st.integers(0, 5), s=st.integers(8, 200))
def test_polynomial_trend_leaves_window_variances_unchanged(coef, order, s):
    rng = np.random.default_rng(s)
    y = rng.standard_normal(4 * s + 3).cumsum()
    t = np.linspace(-3, 3, y.size)
    trend = np.polyval(coef[: order + 1], t)
    # order-m detrending only annihilates trends up to degree m within every window
    base = segment_variances(y, s, 5)
    moved = segment_variances(y + trend, s, 5)
    np.testing.assert_allclose(np.sqrt(moved), np.sqrt(base), rtol=1e-8, atol=1e-12)


def test_both_ends_uses_tail(rng):
    y = rng.standard_normal(1000).cumsum()
    f_both = segment_variances(y, 300, 2, both_ends=True)
    f_fwd = segment_variances(y, 300, 2, both_ends=False)
    assert f_both.size == 6 and f_fwd.size == 3
    np.testing.assert_allclose(f_both[:3], f_fwd)
    assert f_both[3] == pytest.approx(segment_rms(y[700:], 2) ** 2)


# --- fluctuation function --------------------------------------------------

def test_constant_rms_gives_constant_fq():
    surf = fluctuation_from_variances([np.full(8, 0.49)], DEFAULT_Q, [16])
    np.testing.assert_allclose(surf.values[:, 0], 0.7, rtol=1e-12)


def test_two_window_generalized_means():
    q = np.array([-1.0, 0.0, 2.0])
    surf = fluctuation_from_variances([np.array([1.0, 4.0])], q, [16])
    assert surf.values[2, 0] == pytest.approx(np.sqrt(2.5), abs=1e-12)
    assert surf.values[1, 0] == pytest.approx(np.sqrt(2.0), abs=1e-12)
    # harmonic mean of (1, 2)
    assert surf.values[0, 0] == pytest.approx(4 / 3, abs=1e-12)


def test_q_near_zero_snaps_to_log_mean():
    f2 = np.array([1.0, 4.0, 9.0])
    q = np.array([-1e-9, 1e-9 + 1e-12])
    surf = fluctuation_from_variances([f2], [-1e-9, 5e-9], [16])
    np.testing.assert_allclose(surf.values[:, 0], np.exp(np.mean(np.log(np.sqrt(f2)))))
    assert q.size == 2


def test_zero_windows_excluded_from_negative_q():
    surf = fluctuation_from_variances([np.array([0.0, 1.0, 4.0])], [-2.0, 0.0, 2.0], [16])
    assert surf.n_zero[0] == 1
    assert surf.values[0, 0] == pytest.approx((np.mean([1.0, 0.5 ** 2])) ** -0.5)
    assert surf.values[2, 0] == pytest.approx(np.sqrt(5 / 3))


def test_all_zero_windows_raise():
    with pytest.raises(DegenerateInputError, match="scale 32"):
        fluctuation_from_variances([np.zeros(4)], [2.0], [32])


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(1e-6, 1e6)))
def test_generalized_mean_monotone_in_q(f2):
    surf = fluctuation_from_variances([f2], DEFAULT_Q, [16])
    vals = surf.values[:, 0]
    assert np.all(np.diff(vals) >= -1e-9 * vals[1:])
    if np.ptp(f2) == 0:
        np.testing.assert_allclose(vals, vals[0])


def test_fluctuation_rejects_too_small_scale(rng):
    with pytest.raises(ValueError):
        fluctuation(rng.standard_normal(1000), DEFAULT_Q, [6, 20], order=5)


def test_default_scales():
    s = default_scales(2 ** 16)
    assert s[0] == 16 and s[-1] == 2 ** 14
    assert np.all(np.diff(s) > 0)
    assert 25 <= s.size <= 30


# --- fitting ---------------------------------------------------------------

def test_exact_power_law_surface():
    scales = np.array([16, 32, 64, 128, 256, 512])
    q = DEFAULT_Q
    surf = FluctuationSurface(q, scales, np.tile(scales.astype(float), (q.size, 1)),
                              np.ones(6, int), np.zeros(6, int))
    ex = fit_h(surf)
    np.testing.assert_allclose(ex.h, 1.0)
    np.testing.assert_allclose(ex.tau, q - 1)
    np.testing.assert_allclose(ex.r2, 1.0)
    np.testing.assert_allclose(ex.intercept, 0.0, atol=1e-12)


def test_too_few_scales_flagged():
    scales = np.array([16, 32, 64, 128])
    surf = FluctuationSurface(np.array([2.0]), scales, scales[None, :] * 1.0,
                              np.ones(4, int), np.zeros(4, int))
    with pytest.warns(RuntimeWarning, match="fit failed"):
        ex = fit_h(surf)
    assert ex.failed[0] and np.isnan(ex.h[0])


def test_fit_range_restricts_scales(rng):
    x = rng.standard_normal(2 ** 14)
    m = MFDFA(fit_range=(64, 1024)).fit(x)
    assert m.exponents_.fit_range == (64, 1024)


def test_tau_identity_holds_exactly(fgn_series):
    m = MFDFA().fit(fgn_series(0.5))
    np.testing.assert_array_equal(m.tau_, m.exponents_.q * m.h_ - 1.0)
    assert m.tau_[np.flatnonzero(m.exponents_.q == 0)[0]] == -1.0


def _dfa2_oracle(x, scales):
    """Plain forward-only DFA with quadratic detrending, one polyfit per window."""
    y = np.cumsum(x - np.mean(x))
    logf = []
    for s in scales:
        t = np.arange(s)
        res = []
        for k in range(len(y) // s):
            seg = y[k * s:(k + 1) * s]
            fit = np.polyval(np.polyfit(t, seg, 2), t)
            res.append(np.mean((seg - fit) ** 2))
        logf.append(0.5 * np.log(np.mean(res)))
    return np.polyfit(np.log(scales), logf, 1)[0]


@pytest.mark.parametrize("hurst", [0.3, 0.7])
def test_fgn_h2_against_independent_dfa(fgn_series, hurst):
    x = fgn_series(hurst)
    m = MFDFA().fit(x)
    scales = default_scales(x.size, 2, n_scales=12, min_scale=16)
    oracle = _dfa2_oracle(x, scales)
    assert oracle == pytest.approx(hurst, abs=0.05)
    assert m.hurst() == pytest.approx(hurst, abs=0.05)
    assert m.hurst() == pytest.approx(oracle, abs=0.05)


def test_iid_tau_near_null_line(rng):
    x = rng.standard_normal(2 ** 16)
    m = MFDFA().fit(x)
    sel = (m.exponents_.q >= -3) & (m.exponents_.q <= 3)
    assert np.max(np.abs(m.tau_[sel] - (m.exponents_.q[sel] / 2 - 1))) < 0.1


def test_estimator_params_roundtrip():
    m = MFDFA(order=3, fit_range=(32, 512))
    assert m.get_params()["order"] == 3
    m.set_params(order=2)
    assert m.order == 2
    assert "order=2" in repr(m)


def test_estimator_rejects_large_scale(rng):
    with pytest.raises(ValueError, match="N/4"):
        MFDFA(scales=[16, 2000]).fit(rng.standard_normal(4000))


def test_estimator_accepts_return_series(rng):
    from mfscope.ingest import ReturnSeries
    x = rng.standard_normal(4096)
    a = MFDFA().fit(ReturnSeries.from_array(x, 512)).tau_
    np.testing.assert_array_equal(a, MFDFA().fit(x).tau_)


# --- partition function ----------------------------------------------------

def test_partition_oracle_cascade(cascade_06):
    q = np.linspace(-5, 5, 41)
    est = partition_function_oracle(cascade_06, q)
    np.testing.assert_allclose(est.tau, analytic_tau_cascade(0.6, q), atol=0.02)


def test_partition_oracle_uniform_measure():
    x = generate_binomial_cascade(CascadeSpec(0.5, 12))
    q = np.array([-3.0, 0.0, 1.0, 2.5])
    est = partition_function_oracle(x, q)
    np.testing.assert_allclose(est.tau, q - 1, atol=1e-10)


def test_partition_oracle_q0_counts_support(rng):
    est = partition_function_oracle(rng.standard_normal(2 ** 12), [0.0])
    assert est.tau[0] == pytest.approx(-1.0, abs=1e-12)


def test_partition_oracle_length_policies(rng):
    x = rng.random(1000)
    assert partition_function_oracle(x, [2.0]).depths.max() == 9
    pad = partition_function_oracle(x, [-1.0, 2.0], length_policy="pad")
    assert pad.depths.max() == 10 and pad.n_excluded[-1] == 24
    with pytest.raises(ValueError):
        partition_function_oracle(x, [2.0], length_policy="strict")
