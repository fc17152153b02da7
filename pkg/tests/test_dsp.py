import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lorakey.dsp import (
    SpectralSeq,
    dct2,
    estimate_filter_size,
    idct,
    mwa,
    negotiate_filter,
    suppress_low,
)
from lorakey.errors import AlignmentError, DegenerateEntropyError, DomainError, ParameterError
from lorakey.channel import simulate_trace
from lorakey.metrics import SparseHistogramWarning, capacity_report
from lorakey.runner import ExperimentConfig

finite = st.floats(-100.0, 100.0, allow_nan=False)


def _dct_direct(x):
    """Direct O(N^2) summation of the forward transform."""
    x = np.asarray(x, dtype=float)
    n = x.size
    idx = np.arange(n)
    basis = np.cos(np.pi / n * np.outer(idx, idx + 0.5))  # [z, n]
    return basis @ x


# -- moving window average ---------------------------------------------------

def test_mwa_window_zero_is_identity():
    x = np.array([3.0, -1.0, 4.0, 1.5])
    np.testing.assert_array_equal(mwa(x, 0), x)


def test_mwa_constant():
    np.testing.assert_allclose(mwa(np.full(20, -61.0), 7), -61.0, rtol=0, atol=1e-12)


def test_mwa_hand_summed():
    np.testing.assert_allclose(mwa([0, 10, 0, 10, 0], 3), [5, 10 / 3, 20 / 3, 10 / 3, 5], atol=1e-12)


def test_mwa_rejects_bad_windows():
    with pytest.raises(ParameterError):
        mwa(np.zeros(10), 4)
    with pytest.raises(ParameterError):
        mwa(np.zeros(10), 11)


@settings(max_examples=150, deadline=None)
@given(arrays(float, st.integers(3, 200), elements=finite), st.sampled_from([3, 5, 15, 45]))
def test_mwa_never_increases_variance(x, window):
    assume(window <= x.size)
    assert np.var(mwa(x, window)) <= np.var(x) * (1 + 1e-9) + 1e-9


# -- transform pair --------------------------------------------------------------

def test_dct_of_constant_is_dc_only():
    y = dct2(np.full(64, -55.0)).coeffs
    assert y[0] == pytest.approx(64 * -55.0)
    assert np.max(np.abs(y[1:])) < 1e-9 * abs(y[0])


@pytest.mark.parametrize("k", [1, 3, 17, 63])
def test_dct_of_basis_cosine(k):
    n = 64
    x = np.cos(np.pi / n * (np.arange(n) + 0.5) * k)
    y = dct2(x).coeffs
    oracle = _dct_direct(x)
    np.testing.assert_allclose(y, oracle, atol=1e-9)
    assert y[k] == pytest.approx(n / 2, abs=1e-9)
    assert np.max(np.abs(np.delete(y, k))) < 1e-9


@pytest.mark.parametrize("n", [1, 2, 7, 100, 1000])
def test_dct_matches_direct_summation(n):
    x = np.random.default_rng(n).normal(-60, 5, n)
    np.testing.assert_allclose(dct2(x).coeffs, _dct_direct(x), rtol=1e-10, atol=1e-8)


@pytest.mark.parametrize("n", [1, 2, 7, 100, 10_000])
def test_inverse_pair(n):
    x = np.random.default_rng(n + 1).normal(-60, 5, n)
    back = idct(dct2(x))
    assert np.max(np.abs(back - x)) <= 1e-9 * np.max(np.abs(x))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 300).flatmap(lambda n: st.tuples(
    arrays(float, n, elements=finite), arrays(float, n, elements=finite))),
    st.floats(-10, 10), st.floats(-10, 10))
def test_dct_is_linear(xy, a, b):
    x, y = xy
    lhs = dct2(a * x + b * y).coeffs
    rhs = a * dct2(x).coeffs + b * dct2(y).coeffs
    scale = 1.0 + np.max(np.abs(lhs))
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * scale


def test_transform_errors():
    with pytest.raises(DomainError):
        dct2([])
    with pytest.raises(DomainError):
        SpectralSeq(np.zeros(3), 4)


# -- low-frequency suppression ---------------------------------------------------------

def test_zero_cut_recovers_input():
    x = np.random.default_rng(5).normal(-60, 5, 500)
    np.testing.assert_allclose(suppress_low(x, 0), x, rtol=0, atol=1e-9)


def test_removing_first_cosine_leaves_constant():
    n = 400
    x = -58.0 + 6.0 * np.cos(np.pi / n * (np.arange(n) + 0.5))
    np.testing.assert_allclose(suppress_low(x, 1), -58.0, rtol=0, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(arrays(float, st.integers(2, 300), elements=finite), st.data())
def test_suppression_keeps_mean_and_energy_accounting(x, data):
    n = x.size
    z_cut = data.draw(st.integers(0, n - 1))
    out = suppress_low(x, z_cut)
    assert abs(out.mean() - x.mean()) <= 1e-9 * (1 + np.max(np.abs(x)))
    # orthonormal coefficients for z >= 1 are Y(z) * sqrt(2 / N)
    removed = dct2(x).coeffs[1 : z_cut + 1] * math.sqrt(2.0 / n)
    lost = float(np.sum((x - out) ** 2))
    expected = float(np.sum(removed**2))
    assert abs(lost - expected) <= 1e-9 * max(1.0, expected, float(np.sum(x**2)))


def test_cut_out_of_range():
    with pytest.raises(ParameterError):
        suppress_low(np.zeros(5) + np.arange(5), 5)


# -- filter-size estimation -------------------------------------------------------------

def _ramp(seed=21, n=10_000):
    rng = np.random.default_rng(seed)
    return np.linspace(-50.0, -70.0, n) + rng.uniform(-1.0, 1.0, n)


def _broadband(seed=22):
    return np.random.default_rng(seed).normal(-60.0, 4.0, 10_000)


@pytest.mark.xfail(strict=True, reason="plug-in curve rises ~sqrt(z) on a 1 dB grid; see decisions ledger")
def test_pure_small_scale_gives_flat_curve():
    choice = estimate_filter_size(_broadband(), z_max=50)
    assert np.ptp(choice.entropy_curve) < 0.1


def test_pure_small_scale_filter_is_harmless():
    x = _broadband()
    rng = np.random.default_rng(26)
    alice = x + rng.normal(0.0, 1.0, x.size)
    eves = rng.normal(-60.0, 4.0, (2, x.size))
    fa, fb, choice = negotiate_filter(alice, x, z_max=50)
    assert choice.z0 <= 10
    assert np.var(fb) > 0.99 * np.var(x)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SparseHistogramWarning)
        raw = capacity_report(alice, x, eves, eves.mean(axis=0))
        filt = capacity_report(fa, fb, eves, eves.mean(axis=0))
    assert abs(filt.c_k - raw.c_k) < 0.05


def test_ramp_trend_is_removed():
    x = _ramp()
    choice = estimate_filter_size(x, z_max=100)
    assert choice.z0 <= 10
    assert np.var(suppress_low(x, choice.z0)) < 0.2 * np.var(x)


def test_shuffled_ramp_keeps_its_variance():
    x = np.random.default_rng(23).permutation(_ramp())
    choice = estimate_filter_size(x, z_max=100)
    assert np.var(suppress_low(x, choice.z0)) > 0.9 * np.var(x)


def _sim_bob(scenario, seed):
    return simulate_trace(*ExperimentConfig().setup(scenario, 3.0, seed)).bob


@pytest.mark.xfail(strict=True, reason="plug-in H jitters with grid phase by up to ~0.2 bits; see ledger")
@pytest.mark.parametrize("scenario", ["Ib", "Id", "Od"])
def test_conditional_entropy_is_nearly_monotone(scenario):
    curve = estimate_filter_size(_sim_bob(scenario, 1), z_max=100).entropy_curve
    assert np.all(np.diff(curve) >= -0.02)


@pytest.mark.parametrize("scenario", ["Ib", "Id", "Od"])
def test_conditional_entropy_trends_upward(scenario):
    curve = estimate_filter_size(_sim_bob(scenario, 1), z_max=100).entropy_curve
    assert curve[50:].mean() > curve[:50].mean()
    assert curve[-1] > curve[0]


def test_ramp_entropy_is_monotone():
    curve = estimate_filter_size(_ramp(), z_max=60).entropy_curve
    assert np.all(np.diff(curve) >= -0.02)


def test_estimate_is_deterministic():
    x = _ramp(seed=30, n=3000)
    a, b = estimate_filter_size(x, 40), estimate_filter_size(x.copy(), 40)
    assert a.z0 == b.z0
    np.testing.assert_array_equal(a.entropy_curve, b.entropy_curve)
    np.testing.assert_array_equal(a.gradient_curve, np.diff(a.entropy_curve))


def test_estimate_errors():
    with pytest.raises(DegenerateEntropyError):
        estimate_filter_size(np.full(100, -60.0), 10)
    with pytest.raises(ParameterError):
        estimate_filter_size(np.arange(10.0), 10)
    with pytest.raises(ParameterError):
        estimate_filter_size(np.arange(10.0), 1)


# -- negotiation ----------------------------------------------------------------------------

def test_identical_sequences_filter_identically():
    x = _ramp(n=2000)
    fa, fb, choice = negotiate_filter(x, x, 50)
    np.testing.assert_array_equal(fa, fb)
    assert choice.z0 == estimate_filter_size(x, 50).z0


def test_z0_is_bobs_choice():
    rng = np.random.default_rng(31)
    bob = _ramp(n=2000)
    alice = bob + rng.normal(0, 1, 2000)
    _, _, choice = negotiate_filter(alice, bob, 50)
    assert choice.z0 == estimate_filter_size(bob, 50).z0


def _abs_slope(y):
    return abs(np.polyfit(np.arange(y.size), y, 1)[0])


def test_simulated_trend_removed_on_both_sides():
    config = ExperimentConfig()
    trace = simulate_trace(*config.setup("Od", 3.0, 4))
    fa, fb, _ = negotiate_filter(trace.alice, trace.bob, 100)
    assert _abs_slope(fa) < _abs_slope(trace.alice)
    assert _abs_slope(fb) < _abs_slope(trace.bob)


def test_negotiate_alignment():
    with pytest.raises(AlignmentError):
        negotiate_filter(np.arange(10.0), np.arange(11.0), 5)
