"""Budget allocation strategies and their exhaustive validation oracles.

Three tuning strategies cover jobs of increasing heterogeneity: even
per-repetition splitting for identical tasks, a marginal-gain budget sweep
for groups with differing repetition counts, and a compromise sweep that
balances total phase-1 latency against the slowest group when processing
rates differ too.  Baseline allocators and brute-force searches are included
so every strategy can be checked against ground truth on small instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Literal

import numpy as np

from .distributions import (
    Erlang,
    Exponential,
    Hypoexponential,
    LatencyDistribution,
    QuadratureConfig,
    expected_max_iid_erlang,
    expected_parallel_max,
)
from .errors import InsufficientBudgetError, StateSpaceError
from .market import RateModel, TaskTypeProfile, rate_at_price

Norm = Literal["l1", "l2"]

ORACLE_STATE_LIMIT = 10**7


@dataclass(frozen=True)
class TaskGroup:
    """Tasks of one type sharing a repetition count; the unit of pricing.

    Raising every repetition's price in the group by one unit costs
    task_count * repetitions payment units.
    """

    group_id: str
    task_count: int
    repetitions: int
    profile: TaskTypeProfile

    def __post_init__(self) -> None:
        if self.task_count < 1:
            raise ValueError("task_count must be at least 1")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")

    @property
    def unit_cost(self) -> int:
        return self.task_count * self.repetitions


@dataclass(frozen=True)
class Allocation:
    """Integer unit payments per (group, task, repetition), within budget."""

    budget: int
    payments: tuple[tuple[tuple[int, ...], ...], ...]

    def __post_init__(self) -> None:
        if self.budget < 0:
            raise ValueError("budget cannot be negative")
        for tasks in self.payments:
            for reps in tasks:
                for payment in reps:
                    if payment < 1:
                        raise ValueError("every repetition must be paid at least one unit")
        if self.total_spend > self.budget:
            raise ValueError(
                f"allocation spends {self.total_spend} units, exceeding budget {self.budget}"
            )

    @property
    def total_spend(self) -> int:
        return sum(payment for tasks in self.payments for reps in tasks for payment in reps)

    @property
    def leftover(self) -> int:
        return self.budget - self.total_spend

    def group_price(self, index: int) -> int:
        """The group's uniform per-repetition price; error if payments vary."""
        values = {payment for reps in self.payments[index] for payment in reps}
        if len(values) != 1:
            raise ValueError(f"group {index} payments are not uniform: {sorted(values)}")
        return values.pop()

    @property
    def group_prices(self) -> tuple[int, ...]:
        return tuple(self.group_price(i) for i in range(len(self.payments)))

    @classmethod
    def uniform(cls, budget: int, groups: list[TaskGroup] | tuple[TaskGroup, ...], prices) -> "Allocation":
        """Build an allocation paying each group one price per repetition."""
        if len(prices) != len(groups):
            raise ValueError("one price per group required")
        payments = tuple(
            tuple((int(price),) * group.repetitions for _ in range(group.task_count))
            for group, price in zip(groups, prices)
        )
        return cls(budget=budget, payments=payments)


@dataclass(frozen=True)
class ObjectivePoint:
    """Achieved pair (total phase-1 latency, slowest-group completion)."""

    phase1_sum: float
    bottleneck: float

    def __post_init__(self) -> None:
        if self.phase1_sum <= 0 or self.bottleneck <= 0:
            raise ValueError("objective values must be positive")


def closeness(point: ObjectivePoint, utopia: ObjectivePoint, norm: Norm = "l1") -> float:
    """Distance from an achieved objective point to the utopia point."""
    da = abs(point.phase1_sum - utopia.phase1_sum)
    db = abs(point.bottleneck - utopia.bottleneck)
    if norm == "l1":
        return da + db
    if norm == "l2":
        return math.hypot(da, db)
    raise ValueError(f"unknown norm {norm!r}; expected 'l1' or 'l2'")


# --- even allocation -----------------------------------------------------


def even_allocation(
    budget: int, task_count: int, repetitions: int, seed: int = 0
) -> tuple[tuple[int, ...], ...]:
    """Spread the budget as evenly as possible over every repetition.

    Every repetition gets the floor share; the remainder first adds one unit
    to the same number of repetitions in each task, then to one repetition in
    a seeded random subset of tasks.  Payments sum exactly to the budget and
    differ pairwise by at most one unit.  Never reads a rate model: the
    result depends on (budget, task_count, repetitions, seed) only.
    """
    if task_count < 1 or repetitions < 1:
        raise ValueError("task_count and repetitions must be at least 1")
    slots = task_count * repetitions
    if budget < slots:
        raise InsufficientBudgetError(
            f"budget {budget} cannot pay one unit to each of {slots} repetitions",
            budget=budget,
            required=slots,
        )
    base, remainder = divmod(budget, slots)
    per_task_bumps = remainder // task_count
    odd_tasks = remainder % task_count

    rng = np.random.default_rng(seed)
    payments = [[base] * repetitions for _ in range(task_count)]
    bumped: list[set[int]] = []
    for row in payments:
        chosen = rng.choice(repetitions, size=per_task_bumps, replace=False)
        for index in chosen:
            row[index] += 1
        bumped.append(set(int(i) for i in chosen))
    if odd_tasks:
        for task in rng.choice(task_count, size=odd_tasks, replace=False):
            candidates = [r for r in range(repetitions) if r not in bumped[task]]
            payments[task][candidates[rng.integers(len(candidates))]] += 1
    return tuple(tuple(row) for row in payments)


def single_group_allocation(
    budget: int, group: TaskGroup, per_task: tuple[tuple[int, ...], ...]
) -> Allocation:
    """Wrap per-task repetition payments for one group into an Allocation."""
    if len(per_task) != group.task_count:
        raise ValueError("payment rows must match the group's task count")
    return Allocation(budget=budget, payments=(per_task,))


# --- group latency -------------------------------------------------------


def group_expected_phase1(
    group: TaskGroup,
    price: int,
    model: RateModel | None = None,
    quadrature: QuadratureConfig | None = None,
) -> float:
    """Expected phase-1 completion of the group at a uniform price: the
    slowest of task_count iid Erlang(repetitions, rate(price)) latencies."""
    rate = rate_at_price(model if model is not None else group.profile.onhold_model, price)
    return expected_max_iid_erlang(group.task_count, group.repetitions, rate, quadrature)


class _Phase1Table:
    """Memoized per-group phase-1 latency as a function of price."""

    def __init__(
        self,
        groups: tuple[TaskGroup, ...] | list[TaskGroup],
        models: list[RateModel],
        quadrature: QuadratureConfig | None,
    ):
        self._groups = list(groups)
        self._models = models
        self._quadrature = quadrature
        self._cache: dict[tuple[int, int], float] = {}

    def value(self, index: int, price: int) -> float:
        key = (index, price)
        if key not in self._cache:
            group = self._groups[index]
            rate = rate_at_price(self._models[index], price)
            self._cache[key] = expected_max_iid_erlang(
                group.task_count, group.repetitions, rate, self._quadrature
            )
        return self._cache[key]


def _check_unit_budget(budget: int, groups) -> int:
    total_unit = sum(g.unit_cost for g in groups)
    if total_unit > budget:
        raise InsufficientBudgetError(
            f"budget {budget} cannot pay one unit per repetition ({total_unit} needed)",
            budget=budget,
            required=total_unit,
        )
    return budget - total_unit


def _greedy_sweep(
    groups: tuple[TaskGroup, ...] | list[TaskGroup],
    table: _Phase1Table,
    extra_budget: int,
    evaluate: Callable[[list[float]], float],
    *,
    require_improvement: bool,
) -> tuple[list[int], list[float], int]:
    """Buy one price increment at a time until the budget is exhausted.

    Each step compares the affordable increments by objective decrease per
    payment unit (a group increment costs its unit_cost) and applies the
    best one, breaking ties toward the lowest group index.  With
    require_improvement the sweep stops once no increment strictly helps,
    leaving the rest of the budget unspent.
    """
    unit_costs = [g.unit_cost for g in groups]
    prices = [1] * len(groups)
    phase1 = [table.value(i, 1) for i in range(len(groups))]
    spent = 0
    while True:
        current = evaluate(phase1)
        best_index = -1
        best_score = -math.inf
        best_gain = 0.0
        for index, cost in enumerate(unit_costs):
            if spent + cost > extra_budget:
                continue
            trial = list(phase1)
            trial[index] = table.value(index, prices[index] + 1)
            gain = current - evaluate(trial)
            score = gain / cost
            if score > best_score:
                best_index, best_score, best_gain = index, score, gain
        if best_index < 0:
            break
        if require_improvement and best_gain <= 0:
            break
        prices[best_index] += 1
        phase1[best_index] = table.value(best_index, prices[best_index])
        spent += unit_costs[best_index]
    return prices, phase1, extra_budget - spent


@dataclass(frozen=True)
class SweepResult:
    """Outcome of a single-objective budget sweep."""

    allocation: Allocation
    prices: tuple[int, ...]
    objective: float
    leftover: int


def repetition_allocate(
    budget: int,
    groups: list[TaskGroup] | tuple[TaskGroup, ...],
    model: RateModel,
    quadrature: QuadratureConfig | None = None,
) -> SweepResult:
    """Minimize the summed expected phase-1 latency over the groups.

    All groups must share one task type, so phase 2 is a common constant and
    drops out of the objective.  Budget smaller than the smallest group
    increment is reported as leftover, never force-spent.
    """
    groups = tuple(groups)
    extra = _check_unit_budget(budget, groups)
    table = _Phase1Table(groups, [model] * len(groups), quadrature)
    prices, phase1, leftover = _greedy_sweep(
        groups, table, extra, lambda values: sum(values), require_improvement=False
    )
    return SweepResult(
        allocation=Allocation.uniform(budget, groups, prices),
        prices=tuple(prices),
        objective=sum(phase1),
        leftover=leftover,
    )


@dataclass(frozen=True)
class CompromiseResult:
    """Outcome of the two-objective compromise sweep."""

    allocation: Allocation
    prices: tuple[int, ...]
    objective_point: ObjectivePoint
    utopia: ObjectivePoint
    closeness: float
    leftover: int


def _phase2_means(groups: tuple[TaskGroup, ...]) -> list[float]:
    return [g.repetitions / g.profile.processing_rate for g in groups]


def heterogeneous_allocate(
    budget: int,
    groups: list[TaskGroup] | tuple[TaskGroup, ...],
    norm: Norm = "l1",
    quadrature: QuadratureConfig | None = None,
) -> CompromiseResult:
    """Compromise between total phase-1 latency and the slowest group.

    Runs the budget sweep once per objective to locate the utopia point
    (each objective minimized independently), then sweeps a third time
    minimizing the distance to it.  The bottleneck objective adds each
    group's price-independent expected processing time, repetitions divided
    by the type's processing rate.
    """
    groups = tuple(groups)
    extra = _check_unit_budget(budget, groups)
    table = _Phase1Table(groups, [g.profile.onhold_model for g in groups], quadrature)
    phase2 = _phase2_means(groups)

    def total_phase1(values: list[float]) -> float:
        return sum(values)

    def bottleneck(values: list[float]) -> float:
        return max(value + extra_mean for value, extra_mean in zip(values, phase2))

    _, best_phase1, _ = _greedy_sweep(groups, table, extra, total_phase1, require_improvement=False)
    _, best_bottleneck, _ = _greedy_sweep(groups, table, extra, bottleneck, require_improvement=False)
    utopia = ObjectivePoint(total_phase1(best_phase1), bottleneck(best_bottleneck))

    def distance(values: list[float]) -> float:
        point = ObjectivePoint(total_phase1(values), bottleneck(values))
        return closeness(point, utopia, norm)

    prices, phase1, leftover = _greedy_sweep(
        groups, table, extra, distance, require_improvement=True
    )
    achieved = ObjectivePoint(total_phase1(phase1), bottleneck(phase1))
    return CompromiseResult(
        allocation=Allocation.uniform(budget, groups, prices),
        prices=tuple(prices),
        objective_point=achieved,
        utopia=utopia,
        closeness=closeness(achieved, utopia, norm),
        leftover=leftover,
    )


def objective_point(
    groups: list[TaskGroup] | tuple[TaskGroup, ...],
    prices,
    model: RateModel | None = None,
    quadrature: QuadratureConfig | None = None,
) -> ObjectivePoint:
    """The (phase-1 sum, bottleneck) pair achieved by per-group prices."""
    groups = tuple(groups)
    phase1 = [
        group_expected_phase1(group, price, model, quadrature)
        for group, price in zip(groups, prices)
    ]
    phase2 = _phase2_means(groups)
    return ObjectivePoint(
        sum(phase1), max(value + extra for value, extra in zip(phase1, phase2))
    )


# --- baselines -----------------------------------------------------------


def baseline_biased(
    budget: int, task_count: int, repetitions: int, alpha: float, seed: int = 0
) -> tuple[tuple[int, ...], ...]:
    """Skewed split: a seeded random half of the tasks (the prior half)
    shares floor(alpha * budget), the rest shares the remainder; each half
    is then spread evenly per repetition."""
    if not 0.5 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 1/2 and 1")
    if task_count < 2:
        raise ValueError("biased baseline needs at least two tasks")
    rng = np.random.default_rng(seed)
    prior_count = task_count // 2
    prior_tasks = set(int(i) for i in rng.choice(task_count, size=prior_count, replace=False))
    prior_budget = int(math.floor(alpha * budget))
    seeds = rng.integers(0, 2**63, size=2)
    prior_rows = iter(even_allocation(prior_budget, prior_count, repetitions, int(seeds[0])))
    rest_rows = iter(
        even_allocation(budget - prior_budget, task_count - prior_count, repetitions, int(seeds[1]))
    )
    return tuple(
        next(prior_rows) if task in prior_tasks else next(rest_rows)
        for task in range(task_count)
    )


def baseline_task_even(budget: int, groups: list[TaskGroup] | tuple[TaskGroup, ...]) -> Allocation:
    """Identical total per task, split evenly over its repetitions.

    Prices are floored to keep each group uniform; sub-unit remainders stay
    unspent.  Tasks with more repetitions end up with proportionally cheaper
    repetitions.
    """
    groups = tuple(groups)
    per_task = budget // sum(g.task_count for g in groups)
    prices = [per_task // g.repetitions for g in groups]
    if any(price < 1 for price in prices):
        raise InsufficientBudgetError(
            f"budget {budget} cannot give every task one unit per repetition",
            budget=budget,
            required=sum(g.task_count for g in groups) * max(g.repetitions for g in groups),
        )
    return Allocation.uniform(budget, groups, prices)


def baseline_rep_even(budget: int, groups: list[TaskGroup] | tuple[TaskGroup, ...]) -> Allocation:
    """Identical price for every repetition of every task."""
    groups = tuple(groups)
    total_unit = sum(g.unit_cost for g in groups)
    price = budget // total_unit
    if price < 1:
        raise InsufficientBudgetError(
            f"budget {budget} cannot pay one unit per repetition ({total_unit} needed)",
            budget=budget,
            required=total_unit,
        )
    return Allocation.uniform(budget, groups, [price] * len(groups))


# --- exhaustive oracles ---------------------------------------------------


def iter_feasible_prices(
    budget: int, groups: list[TaskGroup] | tuple[TaskGroup, ...]
) -> Iterator[tuple[int, ...]]:
    """Every per-group uniform price vector affordable within the budget."""
    groups = tuple(groups)
    extra = _check_unit_budget(budget, groups)
    unit_costs = [g.unit_cost for g in groups]
    ranges = [range(extra // cost + 1) for cost in unit_costs]
    for bumps in itertools.product(*ranges):
        if sum(b * c for b, c in zip(bumps, unit_costs)) <= extra:
            yield tuple(1 + b for b in bumps)


@dataclass(frozen=True)
class OracleResult:
    prices: tuple[int, ...]
    value: float
    objective: str
    states: int
    utopia: ObjectivePoint | None = None


def _broadcast(values: np.ndarray, axis: int, ndim: int) -> np.ndarray:
    shape = [1] * ndim
    shape[axis] = len(values)
    return values.reshape(shape)


def exhaustive_oracle(
    budget: int,
    groups: list[TaskGroup] | tuple[TaskGroup, ...],
    objective: Literal["phase1-sum", "closeness", "expected-max"] = "phase1-sum",
    *,
    model: RateModel | None = None,
    norm: Norm = "l1",
    quadrature: QuadratureConfig | None = None,
) -> OracleResult:
    """Enumerate every per-group price vector and return the exact minimizer.

    Refuses instances above ORACLE_STATE_LIMIT states.  For "closeness" the
    utopia point is the exact pair of enumerated minima.  "expected-max"
    evaluates the exact expected completion of all tasks in parallel and is
    intended for very small instances.
    """
    groups = tuple(groups)
    extra = _check_unit_budget(budget, groups)
    unit_costs = [g.unit_cost for g in groups]
    counts = [extra // cost + 1 for cost in unit_costs]
    states = math.prod(counts)
    if states > ORACLE_STATE_LIMIT:
        raise StateSpaceError(
            f"instance has {states} price vectors, above the limit of {ORACLE_STATE_LIMIT}",
            states=states,
        )
    models = [model if model is not None else g.profile.onhold_model for g in groups]
    ndim = len(groups)

    spend = np.zeros(counts)
    for axis, cost in enumerate(unit_costs):
        spend = spend + _broadcast(np.arange(counts[axis]) * cost, axis, ndim)
    feasible = spend <= extra

    if objective == "expected-max":
        best_value = math.inf
        best_prices: tuple[int, ...] | None = None
        for bumps in itertools.product(*(range(c) for c in counts)):
            if sum(b * c for b, c in zip(bumps, unit_costs)) > extra:
                continue
            prices = tuple(1 + b for b in bumps)
            dists: list[LatencyDistribution] = []
            for group, group_model, price in zip(groups, models, prices):
                rate = rate_at_price(group_model, price)
                dists.extend([Erlang(group.repetitions, rate)] * group.task_count)
            value = expected_parallel_max(dists, quadrature)
            if value < best_value:
                best_value, best_prices = value, prices
        assert best_prices is not None
        return OracleResult(best_prices, best_value, objective, states)

    table = _Phase1Table(groups, models, quadrature)
    phase1_axes = [
        np.array([table.value(i, 1 + b) for b in range(counts[i])]) for i in range(ndim)
    ]
    phase1_sum = np.zeros(counts)
    for axis, values in enumerate(phase1_axes):
        phase1_sum = phase1_sum + _broadcast(values, axis, ndim)

    if objective == "phase1-sum":
        target = np.where(feasible, phase1_sum, np.inf)
        flat = int(np.argmin(target))
        bumps = np.unravel_index(flat, counts)
        return OracleResult(
            tuple(1 + int(b) for b in bumps), float(target.flat[flat]), objective, states
        )

    if objective == "closeness":
        phase2 = _phase2_means(groups)
        bottleneck = np.full(counts, -np.inf)
        for axis, values in enumerate(phase1_axes):
            np.maximum(bottleneck, _broadcast(values + phase2[axis], axis, ndim), out=bottleneck)
        best_phase1 = float(np.min(np.where(feasible, phase1_sum, np.inf)))
        best_bottleneck = float(np.min(np.where(feasible, bottleneck, np.inf)))
        utopia = ObjectivePoint(best_phase1, best_bottleneck)
        da = np.abs(phase1_sum - best_phase1)
        db = np.abs(bottleneck - best_bottleneck)
        distance = da + db if norm == "l1" else np.hypot(da, db)
        target = np.where(feasible, distance, np.inf)
        flat = int(np.argmin(target))
        bumps = np.unravel_index(flat, counts)
        return OracleResult(
            tuple(1 + int(b) for b in bumps),
            float(target.flat[flat]),
            objective,
            states,
            utopia=utopia,
        )

    raise ValueError(f"unknown objective {objective!r}")


# --- per-repetition enumeration (identical tasks) -------------------------


def task_latency_distribution(
    payments: tuple[int, ...], model: RateModel
) -> LatencyDistribution:
    """Phase-1 latency of one task from its per-repetition payments."""
    rates = [rate_at_price(model, payment) for payment in payments]
    if len(rates) == 1:
        return Exponential(rates[0])
    if len(rates) == 2:
        if rates[0] == rates[1]:
            return Erlang(2, rates[0])
        return Hypoexponential(rates[0], rates[1])
    raise ValueError("sums of more than two differently priced repetitions are unsupported")


def evaluate_task_payments(
    per_task: tuple[tuple[int, ...], ...],
    model: RateModel,
    quadrature: QuadratureConfig | None = None,
) -> float:
    """Exact expected completion of identical-type tasks run in parallel."""
    return expected_parallel_max(
        [task_latency_distribution(payments, model) for payments in per_task], quadrature
    )


def exhaustive_repetition_search(
    budget: int,
    task_count: int,
    repetitions: int,
    model: RateModel,
    quadrature: QuadratureConfig | None = None,
) -> tuple[tuple[tuple[int, ...], ...], float]:
    """Exact minimizer over every per-repetition split of the budget.

    Supports repetitions <= 2 (longer mixed-rate phase sums have no in-scope
    closed form).  Only full-spend splits are enumerated: the expected
    completion is strictly decreasing in every payment under a nondecreasing
    rate model, so partial spends are dominated.
    """
    if repetitions > 2:
        raise ValueError("exhaustive repetition search supports at most 2 repetitions")
    slots = task_count * repetitions
    if budget < slots:
        raise InsufficientBudgetError(
            f"budget {budget} cannot pay one unit to each of {slots} repetitions",
            budget=budget,
            required=slots,
        )

    def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
        if parts == 1:
            yield (total,)
            return
        for first in range(1, total - parts + 2):
            for rest in compositions(total - first, parts - 1):
                yield (first, *rest)

    seen: set[tuple[tuple[int, ...], ...]] = set()
    best_value = math.inf
    best_plan: tuple[tuple[int, ...], ...] | None = None
    for flat in compositions(budget, slots):
        plan = tuple(
            sorted(
                tuple(sorted(flat[task * repetitions : (task + 1) * repetitions]))
                for task in range(task_count)
            )
        )
        if plan in seen:
            continue
        seen.add(plan)
        value = evaluate_task_payments(plan, model, quadrature)
        if value < best_value:
            best_value, best_plan = value, plan
    assert best_plan is not None
    return best_plan, best_value
