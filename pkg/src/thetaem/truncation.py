"""Truncation radius schedules, the radial cutoff and the truncated drift."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .problem import Array, Problem

# sup |phi'| of the transition profile below; attained at s = 1/2 where
# phi'(1/2) = 2 exactly.
CUTOFF_LIPSCHITZ = 2.0


class ScheduleError(ValueError):
    """A truncation schedule is inadmissible or evaluated outside its domain."""


def transition_profile(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1, h(s)/(h(s)+h(1-s)) between.

    h(s) = exp(-1/s). Symmetric: phi(1 - s) = 1 - phi(s).
    """
    s = np.asarray(s, dtype=float)
    inner = (s > 0) & (s < 1)
    si = np.where(inner, s, 0.5)
    with np.errstate(over="ignore"):
        mid = 1.0 / (1.0 + np.exp(1.0 / si - 1.0 / (1.0 - si)))
    return np.where(s >= 1, 1.0, np.where(inner, mid, 0.0))


def transition_profile_derivative(s):
    s = np.asarray(s, dtype=float)
    inner = (s > 0) & (s < 1)
    si = np.where(inner, s, 0.5)
    u = 1.0 / si - 1.0 / (1.0 - si)
    du = -1.0 / si**2 - 1.0 / (1.0 - si) ** 2
    # e^u / (1 + e^u)^2 written to stay finite for large |u|
    w = np.exp(-np.abs(u)) / (1.0 + np.exp(-np.abs(u))) ** 2
    return np.where(inner, -w * du, 0.0)


@dataclass(frozen=True)
class Cutoff:
    """zeta(x) = phi(radius - |x|): 1 on the (radius-1)-ball, 0 beyond radius."""

    radius: float
    lipschitz_constant: float = CUTOFF_LIPSCHITZ

    def __post_init__(self):
        if not self.radius >= 2:
            raise ValueError(f"cutoff radius must be >= 2, got {self.radius}")


def cutoff_value(cutoff: Cutoff, x: Array) -> Array:
    """zeta at states ``x`` (trailing axis is the state)."""
    with np.errstate(over="ignore"):
        r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    return transition_profile(cutoff.radius - r)


def truncated_drift(problem: Problem, cutoff: Cutoff, x: Array) -> Array:
    x = np.asarray(x, dtype=float)
    zeta = cutoff_value(cutoff, x)[..., np.newaxis]
    with np.errstate(all="ignore"):
        b = problem.drift(x)
        # where() keeps the product total when b overflows outside the support
        return np.where(zeta == 1.0, b, np.where(zeta > 0.0, zeta * b, 0.0))


def onesided_bound(problem: Problem, radius: float, lipschitz: float = CUTOFF_LIPSCHITZ) -> float:
    """M_R + C_zeta * L * (1 + R^l), the global one-sided constant of the truncated drift."""
    L, l = problem.growth_constant, problem.growth_exponent
    return problem.M(radius) + lipschitz * L * (1.0 + radius**l)


@dataclass(frozen=True)
class TruncationSchedule:
    """Strictly decreasing radius map g on (0, delta1]."""

    delta1: float
    g: Callable[[float], float]
    m_of_g: Callable[[float], float]
    name: str = "custom"
    transition_width: float = field(default=1.0, init=False)

    def __post_init__(self):
        if not 0 < self.delta1 <= 1:
            raise ScheduleError("delta1 must lie in (0, 1]")

    def radius(self, delta: float) -> float:
        if not 0 < delta <= self.delta1 * (1 + 1e-12):
            raise ScheduleError(f"delta={delta:g} outside schedule domain (0, {self.delta1:g}]")
        return float(self.g(delta))

    def cutoff(self, delta: float) -> Cutoff:
        return Cutoff(self.radius(delta))


def log_schedule(problem: Problem, c: float) -> TruncationSchedule:
    """g(delta) = c * ln(1/delta), with delta1 chosen so that g(delta1) = 2."""
    if not c > 0:
        raise ScheduleError("log schedule needs c > 0")
    delta1 = min(1.0, math.exp(-2.0 / c))
    return TruncationSchedule(
        delta1=delta1,
        g=lambda d: -c * math.log(d),
        m_of_g=problem.M,
        name=f"log:{c:g}",
    )


def _onesided_grows_linearly(problem: Problem) -> bool:
    radii = np.geomspace(1.0, 1e6, 25)
    m = np.array([problem.M(r) for r in radii])
    m2 = np.array([problem.M(2 * r) for r in radii])
    return bool(np.all(m2 <= 2.0 * m * (1 + 1e-9)))


def default_schedule(problem: Problem, delta_grid=None) -> TruncationSchedule:
    """g(delta) = ln(1/delta)/16 on (0, e^-32], for problems with M_R = O(R)."""
    if not _onesided_grows_linearly(problem):
        raise ScheduleError(
            "M_R grows faster than linearly in R; supply a custom schedule"
        )
    sched = log_schedule(problem, 1.0 / 16.0)
    sched = TruncationSchedule(sched.delta1, sched.g, sched.m_of_g, name="remark22")
    report = validate_schedule(sched, problem, delta_grid)
    if not report.passed:
        raise ScheduleError(f"default schedule inadmissible: {report.first_violation}")
    return sched


def get_schedule(schedule_id: str, problem: Problem) -> TruncationSchedule:
    if schedule_id == "remark22":
        return default_schedule(problem)
    if schedule_id.startswith("log:"):
        return log_schedule(problem, float(schedule_id[4:]))
    raise ValueError(f"unknown schedule id {schedule_id!r} (use 'remark22' or 'log:c')")


@dataclass
class ScheduleReport:
    passed: bool
    first_violation: tuple[float, str] | None
    rows: list[dict]

    def summary(self) -> str:
        head = "schedule admissible on grid" if self.passed else f"schedule FAILS: {self.first_violation}"
        return f"{head} ({len(self.rows)} grid points)"


def default_delta_grid(schedule: TruncationSchedule, points: int = 64) -> Array:
    return np.geomspace(schedule.delta1, schedule.delta1 * 1e-250, points)


def validate_schedule(schedule: TruncationSchedule, problem: Problem, delta_grid=None) -> ScheduleReport:
    """Check the admissibility conditions at every grid delta.

    Conditions: g(delta1) >= 2; g strictly decreasing between consecutive grid
    points; g unbounded as delta -> 0 (probed far below the grid);
    M_g e^{M_g} delta^{1/4} <= 1; g^l delta <= 1.
    """
    grid = np.sort(np.asarray(default_delta_grid(schedule) if delta_grid is None else delta_grid, float))[::-1]
    if grid.size == 0 or grid[0] > schedule.delta1 * (1 + 1e-12) or grid[-1] <= 0:
        raise ScheduleError("delta grid must be a nonempty subset of (0, delta1]")
    l = problem.growth_exponent
    first = None

    def fail(delta, what):
        nonlocal first
        if first is None:
            first = (float(delta), what)

    if not schedule.g(schedule.delta1) >= 2:
        fail(schedule.delta1, "g(delta1) >= 2")

    rows = []
    prev = None
    for delta in grid:
        g = float(schedule.g(delta))
        m = float(schedule.m_of_g(g))
        with np.errstate(over="ignore"):
            stab = float(np.float64(m) * np.exp(np.float64(m)) * delta**0.25)
            growth = float(np.float64(g) ** l * delta)
        row = {"delta": float(delta), "g": g, "M_g": m, "M_exp_M_delta_quarter": stab, "g_pow_l_delta": growth}
        rows.append(row)
        if prev is not None and not g > prev:
            fail(delta, "g strictly decreasing")
        if not stab <= 1:
            fail(delta, "M_g e^M_g delta^(1/4) <= 1")
        if not growth <= 1:
            fail(delta, "g(delta)^l delta <= 1")
        prev = g

    # Divergence probe: g must keep increasing far below the grid and at
    # least double relative to g(delta1).
    probe = np.geomspace(grid[-1], max(grid[-1] * 1e-250, min(1e-300, grid[-1] * 1e-8)), 16)
    vals = np.array([schedule.g(d) for d in probe])
    if not (np.all(np.diff(vals) > 0) and vals[-1] >= 2 * schedule.g(schedule.delta1)):
        fail(probe[-1], "g(delta) -> infinity as delta -> 0")

    return ScheduleReport(passed=first is None, first_violation=first, rows=rows)


def global_onesided_constant(schedule: TruncationSchedule, problem: Problem, delta: float) -> float:
    """M_{g(delta)} + C_zeta L (1 + g(delta)^l)."""
    g = schedule.radius(delta)
    L, l = problem.growth_constant, problem.growth_exponent
    return float(schedule.m_of_g(g)) + CUTOFF_LIPSCHITZ * L * (1.0 + g**l)
