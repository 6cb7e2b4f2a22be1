"""SDE problem instances and sampled audits of the growth / monotonicity assumptions.

Coefficients act on arrays whose trailing axis is the state: ``drift`` maps
``(..., n) -> (..., n)`` and ``diffusion`` maps ``(..., n) -> (..., n, m)``.
Both must be pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

Array = np.ndarray


@dataclass(frozen=True)
class Problem:
    """dX = drift(X) dt + diffusion(X) dW with declared assumption constants.

    ``growth_constant`` and ``growth_exponent`` are the L and l of the
    growth condition; ``local_onesided_constant`` maps a radius R >= 1 to the
    one-sided constant M_R valid on the R-ball.
    """

    name: str
    dim_state: int
    dim_noise: int
    initial_state: Array
    drift: Callable[[Array], Array]
    diffusion: Callable[[Array], Array]
    growth_constant: float
    growth_exponent: float
    local_onesided_constant: Callable[[float], float]
    exact_solution: Callable[[float | Array, Array], Array] | None = None
    pragmatic_radius: float | None = None

    def __post_init__(self):
        if self.dim_state < 1 or self.dim_noise < 1:
            raise ValueError("dimensions must be positive")
        x0 = np.array(self.initial_state, dtype=float).reshape(self.dim_state)
        x0.flags.writeable = False
        object.__setattr__(self, "initial_state", x0)
        if not self.growth_constant > 0:
            raise ValueError("growth constant L must be positive")
        if not self.growth_exponent >= 1:
            raise ValueError("growth exponent l must be >= 1")
        radii = np.geomspace(1.0, 1e3, 16)
        m = np.array([self.local_onesided_constant(float(r)) for r in radii])
        if np.any(m < 1) or np.any(np.diff(m) < 0):
            raise ValueError("R -> M_R must be >= 1 and nondecreasing")

    def M(self, radius: float) -> float:
        return float(self.local_onesided_constant(max(float(radius), 1.0)))

    def with_initial_state(self, x0) -> "Problem":
        return replace(self, initial_state=np.array(x0, dtype=float))


def _example1_drift(x: Array) -> Array:
    ax = np.abs(x)
    return x + ax**2 - x**3 - np.sqrt(ax)


def _scalar_identity_diffusion(x: Array) -> Array:
    return x[..., np.newaxis]


def builtin_example1(x0: float = 1.0) -> Problem:
    """Scalar drift x + |x|^2 - x^3 - |x|^(1/2), diffusion x, M_R = 2R + 1."""
    return Problem(
        name="example1",
        dim_state=1,
        dim_noise=1,
        initial_state=np.array([x0], dtype=float),
        drift=_example1_drift,
        diffusion=_scalar_identity_diffusion,
        growth_constant=2.0,
        growth_exponent=3.0,
        local_onesided_constant=lambda r: 2.0 * r + 1.0,
        pragmatic_radius=8.0,
    )


def builtin_linear(a: float, s: float, x0: float = 1.0) -> Problem:
    """Geometric Brownian motion dX = aX dt + sX dW with its closed-form solution.

    The exact solution is exposed as ``exact_solution(t, W_t)`` and broadcasts
    over arrays of times and Brownian values (W_t has a trailing noise axis).
    """
    a, s, x0 = float(a), float(s), float(x0)
    onesided = max(a, s * s, 1.0)

    def exact(t, w):
        w = np.asarray(w, dtype=float)
        return x0 * np.exp((a - 0.5 * s * s) * np.asarray(t)[..., np.newaxis] + s * w)

    return Problem(
        name=f"linear:{a:g},{s:g},{x0:g}",
        dim_state=1,
        dim_noise=1,
        initial_state=np.array([x0]),
        drift=lambda x: a * x,
        diffusion=lambda x: s * x[..., np.newaxis],
        # L = 0 is not allowed, so keep the floor of 1 shared with M_R.
        growth_constant=max(2.0 * max(abs(a), s * s), 1.0),
        growth_exponent=1.0,
        local_onesided_constant=lambda r: onesided,
        exact_solution=exact,
        pragmatic_radius=None,
    )


_REGISTRY: dict[str, Callable[..., Problem]] = {
    "example1": builtin_example1,
    "linear": builtin_linear,
}


def register_problem(name: str, factory: Callable[..., Problem]) -> None:
    """Make a plugin problem addressable as ``name`` or ``name:arg1,arg2,...``."""
    _REGISTRY[name] = factory


def get_problem(problem_id: str) -> Problem:
    """Resolve ids like ``example1``, ``example1:3`` or ``linear:0.5,0.5,1``."""
    name, _, args = problem_id.partition(":")
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown problem id {problem_id!r}; known: {sorted(_REGISTRY)}") from None
    params = [float(v) for v in args.split(",")] if args else []
    try:
        return factory(*params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for problem {name!r}: {exc}") from None


# ---------------------------------------------------------------------------
# Sampled audits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str
    point: tuple
    value: float
    bound: float


@dataclass
class AssumptionReport:
    """Worst empirical ratios over a sample. Certifies nothing beyond the sample."""

    samples_checked: int = 0
    worst_a1_inner: float = -math.inf
    worst_a1_diff: float = -math.inf
    worst_a1_growth: float = -math.inf
    worst_a2_drift: dict[float, float] = field(default_factory=dict)
    worst_a2_diff: dict[float, float] = field(default_factory=dict)
    violations: list[Violation] = field(default_factory=list)

    @property
    def worst_a2_ratio(self) -> dict[float, float]:
        return {r: max(self.worst_a2_drift[r], self.worst_a2_diff[r]) for r in self.worst_a2_drift}

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        lines = [f"samples checked: {self.samples_checked}"]
        if self.worst_a1_inner > -math.inf:
            lines.append(f"  max <x,b(x)>/(1+|x|^2)      = {self.worst_a1_inner:.6g}")
            lines.append(f"  max |sigma(x)|^2/(1+|x|^2)  = {self.worst_a1_diff:.6g}")
            lines.append(f"  max |b(x)|/(1+|x|^l)        = {self.worst_a1_growth:.6g}")
        for r in sorted(self.worst_a2_drift):
            lines.append(
                f"  R={r:g}: max drift ratio = {self.worst_a2_drift[r]:.6g}, "
                f"max diffusion ratio = {self.worst_a2_diff[r]:.6g}"
            )
        lines.append(f"  violations: {len(self.violations)}")
        for v in self.violations[:5]:
            lines.append(f"    {v.kind} at {v.point}: {v.value:.6g} > {v.bound:.6g}")
        return "\n".join(lines)


def _as_points(problem: Problem, points) -> Array:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1 and problem.dim_state == 1:
        pts = pts[:, np.newaxis]
    if pts.ndim != 2 or pts.shape[1] != problem.dim_state:
        raise ValueError(f"points must have shape (K, {problem.dim_state})")
    return pts


def _check_pure(fn, pts: Array, what: str) -> Array:
    first = fn(pts)
    if not np.array_equal(first, fn(pts), equal_nan=True):
        raise ValueError(f"{what} is not deterministic (two calls disagree)")
    return first


def _record(report, kind, ratio, bound, rtol, witnesses):
    for i in np.flatnonzero(ratio > bound * (1 + rtol) + rtol):
        report.violations.append(
            Violation(kind, tuple(np.atleast_1d(witnesses[i]).ravel()), float(ratio[i]), float(bound))
        )


def check_a1(problem: Problem, points, rtol: float = 1e-9) -> AssumptionReport:
    """Evaluate the three growth inequalities at every point."""
    pts = _as_points(problem, points)
    if len(pts) == 0:
        raise ValueError("points must be nonempty")
    b = _check_pure(problem.drift, pts, "drift")
    sig = _check_pure(problem.diffusion, pts, "diffusion")
    sq = np.sum(pts**2, axis=-1)
    L, l = problem.growth_constant, problem.growth_exponent
    inner = np.sum(pts * b, axis=-1) / (1 + sq)
    diff = np.sum(sig**2, axis=(-2, -1)) / (1 + sq)
    growth = np.linalg.norm(b, axis=-1) / (1 + np.sqrt(sq) ** l)

    report = AssumptionReport(samples_checked=len(pts))
    report.worst_a1_inner = float(inner.max())
    report.worst_a1_diff = float(diff.max())
    report.worst_a1_growth = float(growth.max())
    _record(report, "a1_inner", inner, L, rtol, pts)
    _record(report, "a1_diff", diff, L, rtol, pts)
    _record(report, "a1_growth", growth, L, rtol, pts)
    return report


def check_a2(problem: Problem, radius: float, pairs, rtol: float = 1e-9, report=None) -> AssumptionReport:
    """Maximal empirical one-sided ratios over pairs inside the ``radius`` ball.

    ``pairs`` is ``(xs, ys)`` with matching shapes. Passing an existing report
    accumulates another radius into it.
    """
    xs, ys = (_as_points(problem, p) for p in pairs)
    if xs.shape != ys.shape or len(xs) == 0:
        raise ValueError("pairs must be two nonempty arrays of equal shape")
    if np.any(np.linalg.norm(xs, axis=-1) > radius) or np.any(np.linalg.norm(ys, axis=-1) > radius):
        raise ValueError(f"all pair members must lie in the ball of radius {radius}")
    d = xs - ys
    dist2 = np.sum(d**2, axis=-1)
    if np.any(dist2 == 0):
        raise ValueError("pair members must be distinct")
    db = _check_pure(problem.drift, xs, "drift") - problem.drift(ys)
    ds = _check_pure(problem.diffusion, xs, "diffusion") - problem.diffusion(ys)
    drift_ratio = np.sum(d * db, axis=-1) / dist2
    diff_ratio = np.sum(ds**2, axis=(-2, -1)) / dist2

    report = report if report is not None else AssumptionReport()
    report.samples_checked += len(xs)
    radius = float(radius)
    report.worst_a2_drift[radius] = float(drift_ratio.max())
    report.worst_a2_diff[radius] = float(diff_ratio.max())
    bound = problem.M(radius)
    witnesses = np.concatenate([xs, ys], axis=-1)
    _record(report, f"a2_drift@R={radius:g}", drift_ratio, bound, rtol, witnesses)
    _record(report, f"a2_diff@R={radius:g}", diff_ratio, bound, rtol, witnesses)
    return report


def sample_ball(rng: np.random.Generator, n: int, count: int, radius: float) -> Array:
    """Uniform samples from the closed ``radius`` ball in R^n."""
    g = rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / n)
    return g * r[:, np.newaxis]
