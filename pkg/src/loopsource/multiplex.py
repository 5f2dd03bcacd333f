"""Parallel-source combinatorics and pump-power optimization.

Running m loop sources side by side and keeping the freshest herald
turns the per-source outcome law into an order statistic: the kept loop
index is the minimum across sources.  This module provides that
distribution in closed form, a brute-force enumeration oracle for small
m, and optimizers for the pump power (a single constant level, or one
level per time-bin).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .analytic import _loop_fidelity_array, _single_shot_array, _transmission_chain
from .models import ConstantPump, PerBinPump, ProtocolConfig

# Hard cap on brute-force enumeration work, (t+1)**m joint outcomes.
_ORACLE_MAX_OUTCOMES = 200_000

# Fixed stream for optimizer restarts; restarts are part of the
# deterministic algorithm, not a source of run-to-run variation.
_RESTART_KEY = 20240917
_RESTART_COUNT = 3

_COORDINATE_TOL = 1e-8
_GOLDEN_XTOL = 1e-6
_MAX_SWEEPS = 100


class Objective(Enum):
    CONDITIONAL = "conditional"
    UNCONDITIONAL = "unconditional"


@dataclass(frozen=True)
class ParallelDistribution:
    """Distribution of the freshest herald age across m parallel sources;
    index t is the everyone-failed event."""

    source_count: int
    probabilities: tuple[float, ...]

    def __post_init__(self) -> None:
        if not (isinstance(self.source_count, int) and self.source_count >= 1):
            raise ValueError(f"source count must be a positive integer, got {self.source_count}")
        probs = tuple(float(p) for p in self.probabilities)
        object.__setattr__(self, "probabilities", probs)
        total = math.fsum(probs)
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"probabilities must sum to 1 within 1e-10, got {total}")

    @property
    def time_bins(self) -> int:
        return len(self.probabilities) - 1

    @property
    def no_herald(self) -> float:
        return self.probabilities[-1]


@dataclass(frozen=True)
class OptimizationResult:
    schedule: ConstantPump | PerBinPump
    objective_value: float
    objective_kind: Objective
    evaluations: int


def two_source_distribution(single_shot: float, time_bins: int) -> ParallelDistribution:
    """Freshest-herald distribution for two identical sources with
    per-bin herald probability ``single_shot``."""
    _check_single_shot(single_shot)
    _check_time_bins(time_bins)
    miss = 1.0 - single_shot
    probs = [
        single_shot * miss ** (2 * j) * (2.0 - single_shot) for j in range(time_bins)
    ]
    probs.append(miss ** (2 * time_bins))
    return ParallelDistribution(source_count=2, probabilities=tuple(probs))


def m_source_distribution(
    single_shot: float, time_bins: int, sources: int
) -> ParallelDistribution:
    """Freshest-herald distribution for m identical sources.

    Uses survival functions: the kept index is at least u exactly when
    every source's index is, so P(min >= u) = P(l >= u)**m and the pmf
    falls out by differencing.
    """
    _check_single_shot(single_shot)
    _check_time_bins(time_bins)
    if sources < 1:
        raise ValueError(f"source count must be >= 1, got {sources}")
    miss = 1.0 - single_shot
    survival = miss ** (np.arange(time_bins + 1, dtype=float) * sources)
    probs = tuple(survival[:-1] - survival[1:]) + (float(survival[-1]),)
    return ParallelDistribution(source_count=sources, probabilities=probs)


def m_source_distribution_oracle(
    single_shot: float, time_bins: int, sources: int
) -> ParallelDistribution:
    """Brute-force enumeration of all (t+1)**m joint source outcomes,
    scoring each by the minimum index.  Exponential in m; a test oracle."""
    _check_single_shot(single_shot)
    _check_time_bins(time_bins)
    if sources < 1:
        raise ValueError(f"source count must be >= 1, got {sources}")
    if (time_bins + 1) ** sources > _ORACLE_MAX_OUTCOMES:
        raise ValueError("enumeration too large; the oracle is meant for small m and t")
    miss = 1.0 - single_shot
    per_source = [single_shot * miss**l for l in range(time_bins)]
    per_source.append(miss**time_bins)
    mass = [0.0] * (time_bins + 1)
    for combo in itertools.product(range(time_bins + 1), repeat=sources):
        weight = 1.0
        for outcome in combo:
            weight *= per_source[outcome]
        mass[min(combo)] += weight
    return ParallelDistribution(source_count=sources, probabilities=tuple(mass))


def parallel_unconditional_fidelity(
    dist: ParallelDistribution, per_loop_fidelity
) -> float:
    """Average output fidelity of the parallel arrangement, weighting the
    per-loop fidelities by the freshest-herald distribution (the
    no-herald event contributes zero)."""
    fidelities = np.asarray(per_loop_fidelity, dtype=float)
    if fidelities.shape[0] < dist.time_bins:
        raise ValueError(
            f"need a fidelity for each of {dist.time_bins} loop counts, "
            f"got {fidelities.shape[0]}"
        )
    weights = np.asarray(dist.probabilities[:-1])
    return float(np.sum(weights * fidelities[: dist.time_bins]))


def optimize_constant(
    config: ProtocolConfig,
    objective: Objective,
    bounds: tuple[float, float] = (1e-3, 10.0),
) -> OptimizationResult:
    """Best constant pump level within ``bounds`` for the chosen
    objective: a coarse logarithmic scan followed by golden-section
    refinement of the best bracket.  Ties go to the lowest pump level.
    """
    lo, hi = _check_bounds(bounds)
    evaluate, evals = _counted_objective(config, objective)

    def phi(x: float) -> float:
        return evaluate(np.full(config.time_bins, x))

    grid = np.geomspace(lo, hi, 64)
    values = [phi(x) for x in grid]
    best = int(np.argmax(values))
    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, grid.size - 1)]
    x_best, v_best = _golden_max(phi, a, b)
    if values[best] > v_best or (values[best] == v_best and grid[best] < x_best):
        x_best, v_best = float(grid[best]), values[best]
    return OptimizationResult(
        schedule=ConstantPump(x_best),
        objective_value=v_best,
        objective_kind=objective,
        evaluations=evals(),
    )


def optimize_schedule(
    config: ProtocolConfig,
    objective: Objective,
    bounds: tuple[float, float] = (1e-3, 10.0),
) -> OptimizationResult:
    """Best per-bin pump schedule within ``bounds``: coordinate ascent
    seeded at the constant optimum plus a few fixed random restarts,
    stopping a pass once no coordinate improves by more than 1e-8.
    Returns the schedule in reverse-chronological order (entry 0 is the
    final bin).
    """
    lo, hi = _check_bounds(bounds)
    t = config.time_bins
    constant = optimize_constant(config, objective, bounds)
    evaluate, evals = _counted_objective(config, objective)

    starts = [np.full(t, constant.schedule.mean_photon_number)]
    rng = np.random.Generator(np.random.Philox(key=np.array([_RESTART_KEY, 0], dtype=np.uint64)))
    for _ in range(_RESTART_COUNT):
        starts.append(np.exp(rng.uniform(math.log(lo), math.log(hi), size=t)))

    best_schedule: np.ndarray | None = None
    best_value = -math.inf
    for start in starts:
        schedule, value = _coordinate_ascent(evaluate, start, lo, hi)
        if value > best_value or (
            value == best_value
            and best_schedule is not None
            and tuple(schedule) < tuple(best_schedule)
        ):
            best_schedule, best_value = schedule, value
    return OptimizationResult(
        schedule=PerBinPump(tuple(float(x) for x in best_schedule)),
        objective_value=best_value,
        objective_kind=objective,
        evaluations=constant.evaluations + evals(),
    )


def _coordinate_ascent(evaluate, start: np.ndarray, lo: float, hi: float):
    current = start.copy()
    current_value = evaluate(current)
    grid = np.geomspace(lo, hi, 16)
    for _ in range(_MAX_SWEEPS):
        largest_gain = 0.0
        for axis in range(current.size):

            def phi(x: float, axis: int = axis) -> float:
                trial = current.copy()
                trial[axis] = x
                return evaluate(trial)

            values = [phi(x) for x in grid]
            best = int(np.argmax(values))
            a = grid[max(best - 1, 0)]
            b = grid[min(best + 1, grid.size - 1)]
            x_new, v_new = _golden_max(phi, a, b)
            if values[best] > v_new:
                x_new, v_new = float(grid[best]), values[best]
            if v_new > current_value:
                largest_gain = max(largest_gain, v_new - current_value)
                current[axis] = x_new
                current_value = v_new
        if largest_gain <= _COORDINATE_TOL:
            break
    return current, current_value


def _golden_max(fn, a: float, b: float, xtol: float = _GOLDEN_XTOL):
    """Golden-section search for a maximum on [a, b].  On plateaus the
    left probe wins, biasing results toward the lower end."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc = fn(c)
    fd = fn(d)
    while b - a > xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fn(d)
    if fc >= fd:
        return c, fc
    return d, fd


def _counted_objective(config: ProtocolConfig, objective: Objective):
    """Objective over a reverse-chronological pump vector, with an
    evaluation counter.  The conditional objective is extended with
    value 0 where the train can never herald, keeping it total."""
    if not isinstance(objective, Objective):
        raise ValueError(f"objective must be an Objective, got {objective!r}")
    eta_d = config.detector.efficiency
    kind = config.detector.kind
    taus = _transmission_chain(config.loss, config.time_bins)
    count = 0

    def evaluate(nbars: np.ndarray) -> float:
        nonlocal count
        count += 1
        singles = _single_shot_array(nbars, eta_d, kind)
        no_later = np.concatenate(([1.0], np.cumprod(1.0 - singles)))
        weights = singles * no_later[:-1]
        fidelities = _loop_fidelity_array(nbars, eta_d, taus, kind)
        unconditional = float(weights @ fidelities)
        if objective is Objective.UNCONDITIONAL:
            return unconditional
        herald = 1.0 - float(no_later[-1])
        if herald == 0.0:
            return 0.0
        return unconditional / herald

    return evaluate, lambda: count


def _check_single_shot(single_shot: float) -> None:
    if not (0.0 <= single_shot <= 1.0):
        raise ValueError(f"herald probability must lie in [0, 1], got {single_shot}")


def _check_time_bins(time_bins: int) -> None:
    if not (isinstance(time_bins, int) and time_bins >= 1):
        raise ValueError(f"time_bins must be a positive integer, got {time_bins}")


def _check_bounds(bounds: tuple[float, float]) -> tuple[float, float]:
    lo, hi = bounds
    if not (0.0 < lo < hi):
        raise ValueError(f"bounds must satisfy 0 < lo < hi, got {bounds}")
    return float(lo), float(hi)
