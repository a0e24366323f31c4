"""Price-to-rate market models and clock-rate inference from probe data.

The on-hold clock rate of a task is a nondecreasing function of its unit
price; the linear form is the workhorse, with quadratic, logarithmic, and
table-interpolated variants available as robustness stressors.  Rates are
inferred from probe observations (arrival counts over a window) by maximum
likelihood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ConfigError, InconsistentProbeError, InsufficientDataError


class ProbeMode(str, Enum):
    FIXED_PERIOD = "FixedPeriod"
    RANDOM_PERIOD = "RandomPeriod"


def _require_price(price) -> float:
    value = float(price)
    if value < 1:
        raise ValueError(f"price must be at least one payment unit, got {price!r}")
    return value


@dataclass(frozen=True)
class LinearRate:
    """rate = slope * price + intercept; nondecreasing, positive for price >= 1."""

    slope: float
    intercept: float = 0.0

    def __post_init__(self) -> None:
        if self.slope < 0:
            raise ValueError("slope must be nonnegative")
        if self.slope * 1 + self.intercept <= 0:
            raise ValueError("rate must be positive at the minimum price of 1")


@dataclass(frozen=True)
class QuadraticRate:
    """rate = base + curvature * price**2."""

    base: float
    curvature: float

    def __post_init__(self) -> None:
        if self.curvature < 0:
            raise ValueError("curvature must be nonnegative")
        if self.base + self.curvature <= 0:
            raise ValueError("rate must be positive at the minimum price of 1")


@dataclass(frozen=True)
class LogarithmicRate:
    """rate = scale * log(1 + price)."""

    scale: float

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise ValueError("scale must be positive")


@dataclass(frozen=True)
class TableRate:
    """Explicit (price, rate) pairs with linear interpolation, no extrapolation."""

    prices: tuple[float, ...]
    rates: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.prices) < 2 or len(self.prices) != len(self.rates):
            raise ValueError("table needs at least two (price, rate) pairs")
        if any(b <= a for a, b in zip(self.prices, self.prices[1:])):
            raise ValueError("table prices must be strictly increasing")
        if any(r <= 0 for r in self.rates):
            raise ValueError("table rates must be positive")
        if any(b < a for a, b in zip(self.rates, self.rates[1:])):
            raise ValueError("table rates must be nondecreasing in price")


RateModel = Union[LinearRate, QuadraticRate, LogarithmicRate, TableRate]


def rate_at_price(model: RateModel, price) -> float:
    """On-hold clock rate promised by `model` at an integer unit price >= 1."""
    value = _require_price(price)
    if isinstance(model, LinearRate):
        return model.slope * value + model.intercept
    if isinstance(model, QuadraticRate):
        return model.base + model.curvature * value * value
    if isinstance(model, LogarithmicRate):
        return model.scale * math.log1p(value)
    if isinstance(model, TableRate):
        if value < model.prices[0] or value > model.prices[-1]:
            raise ValueError(
                f"price {value:g} outside table range "
                f"[{model.prices[0]:g}, {model.prices[-1]:g}]; refusing to extrapolate"
            )
        return float(np.interp(value, model.prices, model.rates))
    raise TypeError(f"unsupported rate model {model!r}")


@dataclass(frozen=True)
class TaskTypeProfile:
    """A task type: its processing clock rate and its on-hold rate model."""

    label: str
    processing_rate: float
    onhold_model: RateModel

    def __post_init__(self) -> None:
        if self.processing_rate <= 0:
            raise ValueError("processing_rate must be positive")


@dataclass(frozen=True)
class ProbeObservation:
    """Arrivals counted while probing one task type at one price.

    Timestamps, when present, are the ordered arrival epochs in (0, duration].
    """

    mode: ProbeMode
    price: int
    task_type: str
    events: int
    duration: float
    timestamps: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.events < 0:
            raise ValueError("event count cannot be negative")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        _require_price(self.price)
        if self.timestamps is not None:
            if len(self.timestamps) != self.events:
                raise ValueError("timestamp count must match the event count")
            previous = 0.0
            for stamp in self.timestamps:
                if stamp <= previous:
                    raise ValueError("timestamps must be strictly increasing and positive")
                previous = stamp
            if previous > self.duration:
                raise ValueError("timestamps must not exceed the probe duration")


@dataclass(frozen=True)
class RateEstimate:
    """Maximum-likelihood on-hold rate from one probe."""

    rate: float
    adjusted_rate: float | None
    mode: ProbeMode
    events: int
    duration: float
    degenerate: bool = False


def infer_onhold_rate(observation: ProbeObservation) -> RateEstimate:
    """ML estimate events/duration; event-count-stopped probes also get the
    (events-1)/events small-sample adjustment, degenerate at a single event."""
    if observation.events == 0:
        raise InsufficientDataError(
            "probe observed no arrivals; extend the probe window",
            duration=observation.duration,
        )
    rate = observation.events / observation.duration
    adjusted = None
    degenerate = False
    if observation.mode is ProbeMode.RANDOM_PERIOD:
        adjusted = (observation.events - 1) / observation.events * rate
        degenerate = observation.events == 1
    return RateEstimate(
        rate=rate,
        adjusted_rate=adjusted,
        mode=observation.mode,
        events=observation.events,
        duration=observation.duration,
        degenerate=degenerate,
    )


@dataclass(frozen=True)
class ProcessingRateEstimate:
    """Processing rate recovered from a full-cycle probe and an on-hold rate.

    `subtractive` is overall - onhold (the default); `harmonic` inverts the
    sum-of-phase-means identity 1/overall = 1/onhold + 1/processing.  The two
    have disjoint validity domains, so each is None where non-positive.
    """

    rate: float
    method: str
    subtractive: float | None
    harmonic: float | None
    overall_rate: float


def infer_processing_rate(
    overall: ProbeObservation,
    onhold_rate: float,
    method: str = "subtractive",
) -> ProcessingRateEstimate:
    if method not in ("subtractive", "harmonic"):
        raise ValueError(f"unknown method {method!r}; expected 'subtractive' or 'harmonic'")
    if onhold_rate <= 0:
        raise ValueError("onhold_rate must be positive")
    if overall.events == 0:
        raise InsufficientDataError(
            "full-cycle probe observed no completions", duration=overall.duration
        )
    overall_rate = overall.events / overall.duration
    difference = overall_rate - onhold_rate
    subtractive = difference if difference > 0 else None
    mean_gap = 1.0 / overall_rate - 1.0 / onhold_rate
    harmonic = 1.0 / mean_gap if mean_gap > 0 else None
    chosen = subtractive if method == "subtractive" else harmonic
    if chosen is None:
        raise InconsistentProbeError(
            f"{method} processing-rate estimate is non-positive "
            f"(overall {overall_rate:.6g}, on-hold {onhold_rate:.6g})"
        )
    return ProcessingRateEstimate(
        rate=chosen,
        method=method,
        subtractive=subtractive,
        harmonic=harmonic,
        overall_rate=overall_rate,
    )


@dataclass(frozen=True)
class LinearFit:
    model: LinearRate
    r_squared: float


def fit_linear_model(points: list[tuple[float, float]]) -> LinearFit:
    """Ordinary least squares of rate on price.

    Requires at least two distinct prices; rejects fits that are decreasing
    or non-positive anywhere on the admissible price range, since such a
    model cannot drive an allocation.
    """
    if len({price for price, _ in points}) < 2:
        raise ValueError("linear fit needs at least two distinct prices")
    xs = np.array([price for price, _ in points], dtype=float)
    ys = np.array([rate for _, rate in points], dtype=float)
    x_mean, y_mean = xs.mean(), ys.mean()
    slope = float(np.sum((xs - x_mean) * (ys - y_mean)) / np.sum((xs - x_mean) ** 2))
    intercept = float(y_mean - slope * x_mean)
    residual = float(np.sum((ys - (slope * xs + intercept)) ** 2))
    total = float(np.sum((ys - y_mean) ** 2))
    if total == 0.0:
        r_squared = 1.0 if residual <= 1e-24 else 0.0
    else:
        r_squared = 1.0 - residual / total
    if slope < 0 or slope + intercept <= 0:
        raise ValueError(
            f"fitted rate model (slope {slope:.6g}, intercept {intercept:.6g}) "
            "is not positive and nondecreasing over prices >= 1"
        )
    return LinearFit(model=LinearRate(slope, intercept), r_squared=r_squared)


# --- probe file format --------------------------------------------------
#
# Line-oriented text, one observation per file:
#
#   header:     <mode>,<price>,<type>     mode is FixedPeriod or RandomPeriod
#   arrivals:   one timestamp per line, seconds, strictly increasing
#   terminator: T0=<duration>
#
# Blank lines and lines starting with '#' are ignored.


def parse_probe_text(text: str, source: str = "<string>") -> ProbeObservation:
    header: tuple[ProbeMode, int, str] | None = None
    timestamps: list[float] = []
    duration: float | None = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if duration is not None:
            raise ConfigError(f"{source}: content after the T0 terminator", line=number)
        if header is None:
            parts = [part.strip() for part in line.split(",")]
            if len(parts) != 3:
                raise ConfigError(
                    f"{source}: header must be '<mode>,<price>,<type>'", line=number
                )
            mode_token, price_token, type_token = parts
            try:
                mode = ProbeMode(mode_token)
            except ValueError:
                raise ConfigError(
                    f"{source}: unknown mode {mode_token!r}; expected FixedPeriod or"
                    " RandomPeriod",
                    line=number,
                ) from None
            try:
                price = int(price_token)
            except ValueError:
                raise ConfigError(f"{source}: price must be an integer", line=number) from None
            if price < 1 or not type_token:
                raise ConfigError(f"{source}: price must be >= 1 and type non-empty", line=number)
            header = (mode, price, type_token)
            continue
        if line.startswith("T0="):
            try:
                duration = float(line[3:])
            except ValueError:
                raise ConfigError(f"{source}: malformed T0 value", line=number) from None
            continue
        try:
            stamp = float(line)
        except ValueError:
            raise ConfigError(f"{source}: expected a timestamp, got {line!r}", line=number) from None
        if timestamps and stamp <= timestamps[-1]:
            raise ConfigError(f"{source}: timestamps must be strictly increasing", line=number)
        if stamp <= 0:
            raise ConfigError(f"{source}: timestamps must be positive", line=number)
        timestamps.append(stamp)
    if header is None:
        raise ConfigError(f"{source}: missing header line")
    if duration is None:
        raise ConfigError(f"{source}: missing T0=<duration> terminator")
    mode, price, task_type = header
    try:
        return ProbeObservation(
            mode=mode,
            price=price,
            task_type=task_type,
            events=len(timestamps),
            duration=duration,
            timestamps=tuple(timestamps),
        )
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_probe_file(path: str | Path) -> ProbeObservation:
    path = Path(path)
    return parse_probe_text(path.read_text(), source=str(path))
