"""Seeded Monte Carlo execution of a job under a given allocation.

Every (task, repetition, phase) triple owns an independent counter-based
random stream keyed off the master seed, and trial t always consumes draw t
of each stream.  Results are therefore bitwise reproducible, independent of
evaluation order, and unchanged for the first T trials when more trials are
requested.  The processing-phase sampler never sees a price: payments can
only move the on-hold phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .allocation import Allocation, TaskGroup
from .market import ProbeMode, ProbeObservation, TaskTypeProfile, rate_at_price

_PHASE_BITS = 1
_REP_BITS = 20
_MAX_TASKS = 1 << 42
_PROBE_STREAM = 1 << 63


def _stream_key(seed: int, stream: int) -> int:
    return (int(seed) << 64) | int(stream)


def _task_stream(task_index: int, repetition: int, phase: int) -> int:
    if task_index >= _MAX_TASKS:
        raise ValueError("too many tasks for the stream id layout")
    if repetition >= 1 << _REP_BITS:
        raise ValueError("too many repetitions for the stream id layout")
    return (task_index << (_REP_BITS + _PHASE_BITS)) | (repetition << _PHASE_BITS) | phase


def _exponential_draws(seed: int, stream: int, count: int, rate: float) -> np.ndarray:
    """Inverse-transform exponential samples from one named substream."""
    generator = np.random.Generator(np.random.Philox(key=_stream_key(seed, stream)))
    uniforms = generator.random(count)
    return -np.log1p(-uniforms) / rate


@dataclass(frozen=True)
class JobSpec:
    """A job to simulate: groups, their allocation, and the trial plan."""

    groups: tuple[TaskGroup, ...]
    allocation: Allocation
    trials: int
    seed: int

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trial count must be at least 1")
        if self.seed < 0 or self.seed >= 1 << 64:
            raise ValueError("seed must fit in 64 bits")
        if len(self.allocation.payments) != len(self.groups):
            raise ValueError("allocation does not cover every group")
        for group, tasks in zip(self.groups, self.allocation.payments):
            if len(tasks) != group.task_count:
                raise ValueError(f"group {group.group_id}: payment rows != task count")
            if any(len(reps) != group.repetitions for reps in tasks):
                raise ValueError(f"group {group.group_id}: payment columns != repetitions")


@dataclass(frozen=True)
class SimulationStats:
    """Monte Carlo summary of the job completion latency."""

    mean: float
    std_dev: float
    std_error: float
    ci95_half_width: float
    trials: int
    group_means: dict[str, float]
    last_finisher_share: dict[str, float]


def sample_task_latency(
    repetitions: int,
    price: int,
    profile: TaskTypeProfile,
    rng: np.random.Generator,
) -> float:
    """One task's total latency: per repetition, an on-hold draw at the
    priced rate followed by a processing draw at the type's fixed rate."""
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    onhold_rate = rate_at_price(profile.onhold_model, price)
    total = 0.0
    for _ in range(repetitions):
        total += -math.log1p(-rng.random()) / onhold_rate
        total += -math.log1p(-rng.random()) / profile.processing_rate
    return total


def group_completion_samples(spec: JobSpec) -> np.ndarray:
    """Per-trial completion time of each group, shape (groups, trials)."""
    trials = spec.trials
    completions = np.empty((len(spec.groups), trials))
    task_index = 0
    for position, (group, task_payments) in enumerate(zip(spec.groups, spec.allocation.payments)):
        processing_rate = group.profile.processing_rate
        slowest = np.zeros(trials)
        for payments in task_payments:
            total = np.zeros(trials)
            for repetition, payment in enumerate(payments):
                onhold_rate = rate_at_price(group.profile.onhold_model, payment)
                total += _exponential_draws(
                    spec.seed, _task_stream(task_index, repetition, 0), trials, onhold_rate
                )
                total += _exponential_draws(
                    spec.seed, _task_stream(task_index, repetition, 1), trials, processing_rate
                )
            np.maximum(slowest, total, out=slowest)
            task_index += 1
        completions[position] = slowest
    return completions


def job_latency_samples(spec: JobSpec) -> np.ndarray:
    """Per-trial job latency: the slowest group completion, shape (trials,)."""
    return group_completion_samples(spec).max(axis=0)


def simulate_job(spec: JobSpec) -> SimulationStats:
    completions = group_completion_samples(spec)
    job = completions.max(axis=0)
    std_dev = float(job.std(ddof=1)) if spec.trials > 1 else 0.0
    std_error = std_dev / math.sqrt(spec.trials)
    last = completions.argmax(axis=0)
    counts = np.bincount(last, minlength=len(spec.groups))
    return SimulationStats(
        mean=float(job.mean()),
        std_dev=std_dev,
        std_error=std_error,
        ci95_half_width=1.96 * std_error,
        trials=spec.trials,
        group_means={
            group.group_id: float(row.mean()) for group, row in zip(spec.groups, completions)
        },
        last_finisher_share={
            group.group_id: count / spec.trials for group, count in zip(spec.groups, counts)
        },
    )


def simulate_poisson_probe(
    rate: float,
    mode: ProbeMode,
    *,
    duration: float | None = None,
    events: int | None = None,
    seed: int = 0,
    price: int = 1,
    task_type: str = "probe",
) -> ProbeObservation:
    """Sample a probe run: arrival gaps are iid exponential at `rate`.

    FixedPeriod stops at `duration`; RandomPeriod stops after `events`
    arrivals and reports the last arrival epoch as the duration.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    generator = np.random.Generator(np.random.Philox(key=_stream_key(seed, _PROBE_STREAM)))
    if mode is ProbeMode.FIXED_PERIOD:
        if duration is None or duration <= 0:
            raise ValueError("FixedPeriod needs a positive duration")
        if events is not None:
            raise ValueError("FixedPeriod takes no event count")
        stamps: list[float] = []
        clock = 0.0
        chunk = max(16, int(rate * duration * 1.5) + 16)
        while True:
            gaps = -np.log1p(-generator.random(chunk)) / rate
            for gap in gaps:
                clock += gap
                if clock > duration:
                    return ProbeObservation(
                        mode=mode,
                        price=price,
                        task_type=task_type,
                        events=len(stamps),
                        duration=duration,
                        timestamps=tuple(stamps),
                    )
                stamps.append(clock)
    if mode is ProbeMode.RANDOM_PERIOD:
        if events is None or events < 1:
            raise ValueError("RandomPeriod needs a positive event count")
        if duration is not None:
            raise ValueError("RandomPeriod takes no duration")
        gaps = -np.log1p(-generator.random(events)) / rate
        stamps_arr = np.cumsum(gaps)
        return ProbeObservation(
            mode=mode,
            price=price,
            task_type=task_type,
            events=events,
            duration=float(stamps_arr[-1]),
            timestamps=tuple(float(s) for s in stamps_arr),
        )
    raise TypeError(f"unsupported probe mode {mode!r}")
