"""Latency distributions for two-phase task completion.

A task repetition waits for a worker (exponential on-hold phase) and is then
worked on (exponential processing phase); a task repeated k times completes
after an Erlang-distributed total, and a set of tasks running in parallel
completes when the slowest one does.  This module provides the closed forms
for those distributions plus the order-statistics machinery (expected maxima,
product cdfs, quadrature) the allocation strategies are built on.

All rates are 1/second in abstract seconds; times are nonnegative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import QuadratureError

# Below this relative rate difference the two-phase density is evaluated with
# its equal-rate (Erlang-2) limit to avoid catastrophic cancellation.
EQUAL_RATE_REL_TOL = 1e-9


@dataclass(frozen=True)
class QuadratureConfig:
    """Composite-Simpson settings for latency integrals.

    Integration runs over [0, mean_multiples * reference mean] with the given
    number of subdivisions; the distribution mass beyond the upper bound must
    stay below tail_tolerance or the integral is rejected as non-convergent.
    """

    mean_multiples: float = 40.0
    subdivisions: int = 4096
    tail_tolerance: float = 1e-8

    def __post_init__(self) -> None:
        if self.mean_multiples <= 0:
            raise ValueError("mean_multiples must be positive")
        if self.subdivisions < 16:
            raise ValueError("subdivisions must be at least 16")
        if self.tail_tolerance <= 0:
            raise ValueError("tail_tolerance must be positive")


DEFAULT_QUADRATURE = QuadratureConfig()


def _require_rate(value: float, name: str) -> None:
    if not (value > 0) or not math.isfinite(value):
        raise ValueError(f"{name} must be a positive finite rate, got {value!r}")


def _require_count(value: int, name: str) -> None:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")


@dataclass(frozen=True)
class Exponential:
    """Single-phase latency with the given clock rate."""

    rate: float

    def __post_init__(self) -> None:
        _require_rate(self.rate, "rate")


@dataclass(frozen=True)
class Erlang:
    """Total latency of `shape` sequential exponential phases at one rate."""

    shape: int
    rate: float

    def __post_init__(self) -> None:
        _require_count(self.shape, "shape")
        _require_rate(self.rate, "rate")


@dataclass(frozen=True)
class Hypoexponential:
    """Sum of an on-hold and a processing phase with distinct rates."""

    onhold_rate: float
    processing_rate: float

    def __post_init__(self) -> None:
        _require_rate(self.onhold_rate, "onhold_rate")
        _require_rate(self.processing_rate, "processing_rate")


@dataclass(frozen=True)
class MaxOfIID:
    """Latency of the slowest of `count` independent copies of `inner`."""

    count: int
    inner: "LatencyDistribution"

    def __post_init__(self) -> None:
        _require_count(self.count, "count")
        if not isinstance(self.inner, (Exponential, Erlang, Hypoexponential, MaxOfIID)):
            raise ValueError(f"inner must be a latency distribution, got {self.inner!r}")


LatencyDistribution = Union[Exponential, Erlang, Hypoexponential, MaxOfIID]


def _as_times(t) -> tuple[np.ndarray, bool]:
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise ValueError("latency time must be nonnegative")
    return arr, arr.ndim == 0


def _equal_rate_limit(dist: Hypoexponential) -> float | None:
    """Mean rate when the two phases are numerically indistinguishable."""
    gap = abs(dist.onhold_rate - dist.processing_rate)
    if gap < EQUAL_RATE_REL_TOL * max(dist.onhold_rate, dist.processing_rate):
        return 0.5 * (dist.onhold_rate + dist.processing_rate)
    return None


def _pdf(dist: LatencyDistribution, t: np.ndarray) -> np.ndarray:
    if isinstance(dist, Exponential):
        return dist.rate * np.exp(-dist.rate * t)
    if isinstance(dist, Erlang):
        k, lam = dist.shape, dist.rate
        return lam**k * t ** (k - 1) * np.exp(-lam * t) / math.factorial(k - 1)
    if isinstance(dist, Hypoexponential):
        limit = _equal_rate_limit(dist)
        if limit is not None:
            return limit * limit * t * np.exp(-limit * t)
        a, b = dist.onhold_rate, dist.processing_rate
        return a * b / (a - b) * (np.exp(-b * t) - np.exp(-a * t))
    if isinstance(dist, MaxOfIID):
        inner_cdf = _cdf(dist.inner, t)
        return dist.count * inner_cdf ** (dist.count - 1) * _pdf(dist.inner, t)
    raise TypeError(f"unsupported distribution {dist!r}")


def _cdf(dist: LatencyDistribution, t: np.ndarray) -> np.ndarray:
    if isinstance(dist, Exponential):
        return -np.expm1(-dist.rate * t)
    if isinstance(dist, Erlang):
        x = dist.rate * t
        term = np.ones_like(x)
        total = np.ones_like(x)
        for j in range(1, dist.shape):
            term = term * x / j
            total += term
        return np.clip(1.0 - np.exp(-x) * total, 0.0, 1.0)
    if isinstance(dist, Hypoexponential):
        limit = _equal_rate_limit(dist)
        if limit is not None:
            x = limit * t
            return np.clip(1.0 - np.exp(-x) * (1.0 + x), 0.0, 1.0)
        a, b = dist.onhold_rate, dist.processing_rate
        value = 1.0 + (b * np.exp(-a * t) - a * np.exp(-b * t)) / (a - b)
        return np.clip(value, 0.0, 1.0)
    if isinstance(dist, MaxOfIID):
        return _cdf(dist.inner, t) ** dist.count
    raise TypeError(f"unsupported distribution {dist!r}")


def pdf(dist: LatencyDistribution, t):
    """Probability density at time t (scalar or array), in 1/time."""
    arr, scalar = _as_times(t)
    out = _pdf(dist, arr)
    return float(out) if scalar else out


def cdf(dist: LatencyDistribution, t):
    """Probability that the latency is at most t (scalar or array)."""
    arr, scalar = _as_times(t)
    out = _cdf(dist, arr)
    return float(out) if scalar else out


@lru_cache(maxsize=None)
def harmonic_number(n: int) -> float:
    """n-th harmonic number by direct summation."""
    _require_count(n, "n")
    return math.fsum(1.0 / i for i in range(1, n + 1))


def _simpson(values: np.ndarray, step: float) -> float:
    """Composite Simpson rule over an odd-length sample of equal spacing."""
    if len(values) % 2 == 0:
        raise ValueError("Simpson rule needs an even number of intervals")
    acc = values[0] + values[-1] + 4.0 * values[1:-1:2].sum() + 2.0 * values[2:-1:2].sum()
    return float(acc * step / 3.0)


def _grid(upper: float, config: QuadratureConfig) -> tuple[np.ndarray, float]:
    n = config.subdivisions
    if n % 2:
        n += 1
    ts = np.linspace(0.0, upper, n + 1)
    return ts, upper / n


def _check_tail(tail_mass: float, upper: float, config: QuadratureConfig) -> None:
    if tail_mass >= config.tail_tolerance:
        raise QuadratureError(
            f"tail mass {tail_mass:.3e} beyond t={upper:.6g} exceeds "
            f"tolerance {config.tail_tolerance:.1e}; widen the integration bound",
            tail_mass=tail_mass,
            upper_bound=upper,
        )


def mean(dist: LatencyDistribution, quadrature: QuadratureConfig | None = None) -> float:
    """Expected latency; closed form where available, quadrature otherwise."""
    if isinstance(dist, Exponential):
        return 1.0 / dist.rate
    if isinstance(dist, Erlang):
        return dist.shape / dist.rate
    if isinstance(dist, Hypoexponential):
        return 1.0 / dist.onhold_rate + 1.0 / dist.processing_rate
    if isinstance(dist, MaxOfIID):
        if isinstance(dist.inner, Exponential):
            return harmonic_number(dist.count) / dist.inner.rate
        return _mean_of_max(dist, quadrature or DEFAULT_QUADRATURE)
    raise TypeError(f"unsupported distribution {dist!r}")


def _mean_of_max(dist: MaxOfIID, config: QuadratureConfig) -> float:
    inner_mean = mean(dist.inner, config)
    upper = config.mean_multiples * inner_mean
    ts, step = _grid(upper, config)
    inner_cdf = _cdf(dist.inner, ts)
    integrand = ts * dist.count * inner_cdf ** (dist.count - 1) * _pdf(dist.inner, ts)
    _check_tail(1.0 - float(inner_cdf[-1]) ** dist.count, upper, config)
    return _simpson(integrand, step)


def expected_max_two_exp(rate_a: float, rate_b: float) -> float:
    """Expected maximum of two independent exponential latencies."""
    _require_rate(rate_a, "rate_a")
    _require_rate(rate_b, "rate_b")
    return 1.0 / rate_a + 1.0 / rate_b - 1.0 / (rate_a + rate_b)


def expected_max_iid_exp(count: int, rate: float) -> float:
    """Expected maximum of `count` iid exponential latencies: H_n / rate."""
    _require_count(count, "count")
    _require_rate(rate, "rate")
    return harmonic_number(count) / rate


def expected_max_iid_erlang(
    count: int,
    shape: int,
    rate: float,
    quadrature: QuadratureConfig | None = None,
) -> float:
    """Expected maximum of `count` iid Erlang(shape, rate) latencies.

    Evaluated by quadrature of the order-statistics integral
    ``integral of count * F(t)**(count-1) * f(t) * t dt`` so the same code
    path covers every (count, shape) pair; count=1 recovers shape/rate and
    shape=1 recovers the harmonic-number form within quadrature accuracy.
    """
    _require_count(count, "count")
    return _mean_of_max(MaxOfIID(count, Erlang(shape, rate)), quadrature or DEFAULT_QUADRATURE)


def parallel_latency_cdf(dists: list[LatencyDistribution] | tuple[LatencyDistribution, ...], t):
    """cdf of the completion time of independent tasks running in parallel."""
    if not dists:
        raise ValueError("parallel latency needs at least one distribution")
    arr, scalar = _as_times(t)
    out = np.ones_like(arr, dtype=float)
    for dist in dists:
        out = out * _cdf(dist, arr)
    return float(out) if scalar else out


def expected_parallel_max(
    dists: list[LatencyDistribution] | tuple[LatencyDistribution, ...],
    quadrature: QuadratureConfig | None = None,
) -> float:
    """Expected completion time of independent, not necessarily identical tasks.

    Uses the survival-function form ``integral of (1 - prod F_i(t)) dt``,
    which needs no density product rule and is exact for mixed families.
    """
    if not dists:
        raise ValueError("parallel latency needs at least one distribution")
    config = quadrature or DEFAULT_QUADRATURE
    upper = config.mean_multiples * max(mean(d, config) for d in dists)
    ts, step = _grid(upper, config)
    product = np.ones_like(ts)
    for dist in dists:
        product = product * _cdf(dist, ts)
    _check_tail(1.0 - float(product[-1]), upper, config)
    return _simpson(1.0 - product, step)
