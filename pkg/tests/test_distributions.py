"""Tests for the latency distribution core.

Derived expectations are checked against independent oracles computed inline:
numerical convolution for the two-phase density, seeded Monte Carlo for
expected maxima, and survival-function quadrature for order statistics.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdtune.distributions import (
    DEFAULT_QUADRATURE,
    Erlang,
    Exponential,
    Hypoexponential,
    MaxOfIID,
    QuadratureConfig,
    _simpson,
    cdf,
    expected_max_iid_erlang,
    expected_max_iid_exp,
    expected_max_two_exp,
    expected_parallel_max,
    harmonic_number,
    mean,
    parallel_latency_cdf,
    pdf,
)
from crowdtune.errors import QuadratureError

RATES = st.floats(min_value=0.1, max_value=10.0, allow_nan=False)


def mc_se(samples: np.ndarray) -> float:
    return samples.std(ddof=1) / math.sqrt(len(samples))


# --- pdf ---------------------------------------------------------------


def test_pdf_exponential_at_zero():
    assert pdf(Exponential(1.0), 0.0) == pytest.approx(1.0)


def test_pdf_hypoexponential_equal_rates_is_erlang2_limit():
    # Hypoexponential(1, 1) at t=1 collapses to lam^2 * t * exp(-lam t) = e^-1
    assert pdf(Hypoexponential(1.0, 1.0), 1.0) == pytest.approx(math.exp(-1), rel=1e-12)


def test_pdf_hypoexponential_matches_numerical_convolution():
    # oracle: convolve the two exponential densities directly at t=1
    t = 1.0
    a, b = 2.0, 1.0
    us = np.linspace(0.0, t, 20001)
    integrand = a * np.exp(-a * (t - us)) * b * np.exp(-b * us)
    oracle = _simpson(integrand, us[1] - us[0])
    value = pdf(Hypoexponential(a, b), t)
    assert value == pytest.approx(oracle, rel=1e-10)
    assert value == pytest.approx(0.4651, abs=1e-4)


def test_pdf_rejects_negative_time():
    with pytest.raises(ValueError, match="nonnegative"):
        pdf(Exponential(1.0), -0.5)


@pytest.mark.parametrize(
    "bad",
    [
        lambda: Exponential(0.0),
        lambda: Exponential(-1.0),
        lambda: Erlang(0, 1.0),
        lambda: Erlang(2, 0.0),
        lambda: Hypoexponential(1.0, 0.0),
        lambda: MaxOfIID(0, Exponential(1.0)),
        lambda: MaxOfIID(2, "nope"),
    ],
)
def test_invalid_parameters_rejected_at_construction(bad):
    with pytest.raises(ValueError):
        bad()


# --- cdf ---------------------------------------------------------------


def test_cdf_exponential_closed_form():
    d = Exponential(2.0)
    assert cdf(d, 0.0) == 0.0
    ts = np.array([0.1, 0.5, 2.0])
    np.testing.assert_allclose(cdf(d, ts), 1.0 - np.exp(-2.0 * ts), rtol=1e-12)


def test_cdf_max_of_iid_matches_monte_carlo():
    rng = np.random.default_rng(20260811)
    samples = rng.exponential(1.0, size=(10**6, 3)).max(axis=1)
    hits = (samples <= 1.0).mean()
    se = math.sqrt(hits * (1 - hits) / len(samples))
    value = cdf(MaxOfIID(3, Exponential(1.0)), 1.0)
    assert value == pytest.approx(0.2525, abs=1e-4)
    assert abs(value - hits) <= 3 * se


def test_cdf_erlang_matches_pdf_quadrature():
    # oracle: integrate the Erlang density from 0 to t
    d = Erlang(2, 1.0)
    ts = np.linspace(0.0, 1.0, 4097)
    oracle = _simpson(pdf(d, ts), ts[1] - ts[0])
    assert cdf(d, 1.0) == pytest.approx(oracle, rel=1e-10)
    assert cdf(d, 1.0) == pytest.approx(1 - 2 * math.exp(-1), rel=1e-12)


def test_cdf_rejects_negative_time():
    with pytest.raises(ValueError, match="nonnegative"):
        cdf(Erlang(2, 1.0), -1.0)


@given(rate=RATES, times=st.lists(st.floats(min_value=0, max_value=50), min_size=2, max_size=10))
def test_cdf_nondecreasing_and_bounded(rate, times):
    d = Hypoexponential(rate, rate * 1.7)
    values = cdf(d, np.sort(np.asarray(times)))
    assert np.all(values >= 0.0) and np.all(values <= 1.0)
    assert np.all(np.diff(values) >= -1e-12)


# --- mean --------------------------------------------------------------


def test_mean_closed_forms():
    assert mean(Erlang(5, 2.0)) == pytest.approx(2.5)
    assert mean(Hypoexponential(0.0038, 0.01)) == pytest.approx(363.158, abs=1e-3)
    assert mean(MaxOfIID(2, Exponential(1.0))) == pytest.approx(1.5)


def test_mean_of_max_quadrature_path():
    got = mean(MaxOfIID(2, Erlang(2, 1.0)))
    assert got == pytest.approx(2.75, abs=1e-6)


# --- expected maxima ---------------------------------------------------


def test_expected_max_two_exp_iid_cases():
    assert expected_max_two_exp(1.0, 1.0) == pytest.approx(1.5)
    assert expected_max_two_exp(2.0, 2.0) == pytest.approx(0.75)


def test_expected_max_two_exp_monte_carlo():
    rng = np.random.default_rng(7)
    samples = np.maximum(rng.exponential(1.0, 10**6), rng.exponential(0.5, 10**6))
    value = expected_max_two_exp(1.0, 2.0)
    assert value == pytest.approx(7.0 / 6.0, rel=1e-12)
    assert value == pytest.approx(samples.mean(), rel=0.01)


@given(rate_a=RATES, rate_b=RATES)
def test_expected_max_two_exp_symmetric(rate_a, rate_b):
    assert expected_max_two_exp(rate_a, rate_b) == expected_max_two_exp(rate_b, rate_a)


def test_expected_max_two_exp_rejects_nonpositive_rate():
    with pytest.raises(ValueError):
        expected_max_two_exp(0.0, 1.0)


def test_expected_max_iid_exp_values():
    assert expected_max_iid_exp(1, 3.0) == pytest.approx(1.0 / 3.0)
    assert expected_max_iid_exp(2, 1.0) == expected_max_two_exp(1.0, 1.0)
    assert expected_max_iid_exp(4, 1.0) == pytest.approx(25.0 / 12.0, rel=1e-12)


def test_expected_max_iid_exp_monte_carlo():
    rng = np.random.default_rng(11)
    samples = rng.exponential(1.0, size=(10**6, 4)).max(axis=1)
    assert abs(expected_max_iid_exp(4, 1.0) - samples.mean()) <= 3 * mc_se(samples)


def test_expected_max_iid_exp_monotone_in_count_and_rate():
    values = [expected_max_iid_exp(n, 1.0) for n in range(1, 9)]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert expected_max_iid_exp(3, 2.0) < expected_max_iid_exp(3, 1.0)


def test_expected_max_iid_exp_rejects_zero_count():
    with pytest.raises(ValueError):
        expected_max_iid_exp(0, 1.0)


def test_harmonic_number_direct_sum():
    assert harmonic_number(1) == 1.0
    assert harmonic_number(4) == pytest.approx(25.0 / 12.0, rel=1e-15)


def test_expected_max_iid_erlang_reductions():
    assert expected_max_iid_erlang(1, 3, 2.0) == pytest.approx(1.5, rel=1e-6)
    assert expected_max_iid_erlang(2, 1, 1.0) == pytest.approx(1.5, rel=1e-6)


def test_expected_max_iid_erlang_against_order_statistics_oracle():
    # oracle: E[max of 2] = 2 E[X] - E[min of 2], with E[min] from the
    # squared survival function integral (independent of the implementation
    # integrand, which uses F * f).
    d = Erlang(2, 1.0)
    ts = np.linspace(0.0, 200.0, 2 * 10**5 + 1)
    survival = 1.0 - cdf(d, ts)
    expected_min = _simpson(survival**2, ts[1] - ts[0])
    assert expected_min == pytest.approx(1.25, rel=1e-9)
    oracle = 2 * mean(d) - expected_min
    assert expected_max_iid_erlang(2, 2, 1.0) == pytest.approx(oracle, abs=1e-9)

    rng = np.random.default_rng(23)
    samples = rng.gamma(2.0, 1.0, size=(10**6, 2)).max(axis=1)
    assert abs(oracle - samples.mean()) <= 3 * mc_se(samples)


def test_expected_max_iid_erlang_tail_failure_raises():
    tight = QuadratureConfig(mean_multiples=2.0, subdivisions=64, tail_tolerance=1e-8)
    with pytest.raises(QuadratureError) as err:
        expected_max_iid_erlang(4, 3, 1.0, tight)
    assert err.value.tail_mass > 0


# --- parallel composition ---------------------------------------------


def test_parallel_latency_cdf_single_member():
    value = parallel_latency_cdf([Exponential(1.0)], 1.0)
    assert value == pytest.approx(1 - math.exp(-1), rel=1e-12)


def test_parallel_latency_cdf_monte_carlo():
    rng = np.random.default_rng(31)
    samples = np.maximum(rng.exponential(1.0, 10**6), rng.exponential(0.5, 10**6))
    hits = (samples <= 1.0).mean()
    se = math.sqrt(hits * (1 - hits) / len(samples))
    value = parallel_latency_cdf([Exponential(1.0), Exponential(2.0)], 1.0)
    assert value == pytest.approx(0.5466, abs=1e-4)
    assert abs(value - hits) <= 3 * se


def test_parallel_latency_cdf_identical_members_squares():
    member = Erlang(2, 1.0)
    value = parallel_latency_cdf([member, member], 1.0)
    assert value == pytest.approx((1 - 2 * math.exp(-1)) ** 2, rel=1e-12)
    assert value == pytest.approx(cdf(MaxOfIID(2, member), 1.0), rel=1e-12)
    assert value == pytest.approx(0.0698, abs=1e-4)


def test_parallel_latency_cdf_rejects_empty_list():
    with pytest.raises(ValueError):
        parallel_latency_cdf([], 1.0)


def test_expected_parallel_max_matches_closed_forms():
    assert expected_parallel_max([Exponential(1.0), Exponential(2.0)]) == pytest.approx(
        expected_max_two_exp(1.0, 2.0), rel=1e-9
    )
    assert expected_parallel_max([Erlang(2, 1.0), Erlang(2, 1.0)]) == pytest.approx(
        2.75, abs=1e-6
    )


def test_expected_parallel_max_rejects_empty_list():
    with pytest.raises(ValueError):
        expected_parallel_max([])


# --- invariants --------------------------------------------------------


@pytest.mark.parametrize("rate", [0.1, 1.0, 10.0])
@pytest.mark.parametrize(
    "make",
    [
        lambda r: Exponential(r),
        lambda r: Erlang(2, r),
        lambda r: Erlang(6, r),
        lambda r: Hypoexponential(r, 2.5 * r),
        lambda r: MaxOfIID(3, Exponential(r)),
        lambda r: MaxOfIID(8, Erlang(2, r)),
    ],
)
def test_pdf_normalizes_to_one(make, rate):
    d = make(rate)
    upper = DEFAULT_QUADRATURE.mean_multiples * mean(d)
    ts = np.linspace(0.0, upper, DEFAULT_QUADRATURE.subdivisions + 1)
    mass = _simpson(pdf(d, ts), ts[1] - ts[0])
    assert mass >= 1.0 - 1e-6
    assert mass <= 1.0 + 1e-6


@pytest.mark.parametrize(
    "d",
    [
        Exponential(1.3),
        Erlang(3, 0.8),
        Hypoexponential(0.6, 2.2),
        MaxOfIID(4, Erlang(2, 1.1)),
    ],
)
def test_cdf_derivative_matches_pdf(d):
    ts = np.linspace(0.5, 4.0, 25)
    step = 1e-6
    derivative = (cdf(d, ts + step) - cdf(d, ts - step)) / (2 * step)
    density = pdf(d, ts)
    np.testing.assert_allclose(derivative, density, rtol=1e-4)


@given(rate=RATES, scale=st.floats(min_value=0.25, max_value=4.0, allow_nan=False))
@settings(max_examples=40, deadline=None)
def test_rate_scaling_divides_every_expectation(rate, scale):
    base = expected_max_iid_exp(5, rate)
    assert expected_max_iid_exp(5, rate * scale) == pytest.approx(base / scale, rel=1e-10)
    two = expected_max_two_exp(rate, 2 * rate)
    assert expected_max_two_exp(rate * scale, 2 * rate * scale) == pytest.approx(
        two / scale, rel=1e-10
    )
    assert mean(Hypoexponential(rate * scale, 3 * rate * scale)) == pytest.approx(
        mean(Hypoexponential(rate, 3 * rate)) / scale, rel=1e-10
    )


@pytest.mark.parametrize("rate", [0.5, 1.0, 3.0])
def test_rate_scaling_exact_on_quadrature_path(rate):
    scale = 3.0
    base = expected_max_iid_erlang(3, 2, rate)
    scaled = expected_max_iid_erlang(3, 2, rate * scale)
    assert scaled == pytest.approx(base / scale, rel=1e-10)


@given(rate_a=RATES, rate_b=RATES, t=st.floats(min_value=0, max_value=20))
@settings(max_examples=60)
def test_hypoexponential_pdf_symmetric_in_rates(rate_a, rate_b, t):
    forward = pdf(Hypoexponential(rate_a, rate_b), t)
    swapped = pdf(Hypoexponential(rate_b, rate_a), t)
    assert forward == pytest.approx(swapped, rel=1e-9, abs=1e-300)


@pytest.mark.parametrize("rate", [0.1, 0.7, 1.0, 5.0])
def test_hypoexponential_continuous_at_equal_rate_limit(rate):
    near = Hypoexponential(rate, rate * (1 + 1e-10))
    exact = Erlang(2, rate)
    ts = np.linspace(0.0, 10.0 / rate, 50)
    assert np.max(np.abs(pdf(near, ts) - pdf(exact, ts))) <= 1e-6
    assert np.max(np.abs(cdf(near, ts) - cdf(exact, ts))) <= 1e-6


@pytest.mark.parametrize("count", [1, 2, 5, 8])
@pytest.mark.parametrize("rate", [0.5, 1.0, 2.0])
def test_reduction_identity_erlang_shape_one(count, rate):
    quad = expected_max_iid_erlang(count, 1, rate)
    assert quad == pytest.approx(expected_max_iid_exp(count, rate), rel=1e-6)


def test_quadrature_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(mean_multiples=0.0)
    with pytest.raises(ValueError):
        QuadratureConfig(subdivisions=8)
    with pytest.raises(ValueError):
        QuadratureConfig(tail_tolerance=0.0)
