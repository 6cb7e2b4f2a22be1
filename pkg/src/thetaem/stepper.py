"""One-step maps of the (modified) theta-Euler-Maruyama scheme.

The implicit step solves y - theta*delta*b(y) = c. The left side is strongly
monotone when theta*delta times the one-sided constant of b is below 1, which
makes the root unique; the solver itself never differentiates b.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .problem import Array, Problem
from .truncation import (
    Cutoff,
    ScheduleError,
    TruncationSchedule,
    default_schedule,
    onesided_bound,
    truncated_drift,
    validate_schedule,
)


class SolverError(RuntimeError):
    def __init__(self, message: str, diagnostics: "StepDiagnostics"):
        super().__init__(f"{message} ({diagnostics})")
        self.diagnostics = diagnostics


class AdmissibilityError(ValueError):
    """A (theta, delta, truncation) combination violates a required condition."""


@dataclass(frozen=True)
class StepDiagnostics:
    iterations: int = 0
    residual: float = 0.0
    fallback_used: bool = False


@dataclass(frozen=True)
class SchemeConfig:
    """theta in [0, 1], stepsize delta, and the truncation radius g(delta).

    ``radius`` is required when ``truncated``; it is resolved either from a
    schedule (literal mode) or fixed by the user (pragmatic mode), see
    :func:`configure`.
    """

    theta: float
    stepsize: float
    truncated: bool = True
    radius: float | None = None
    solver_tolerance: float = 1e-12
    solver_max_iters: int = 200

    def __post_init__(self):
        if not 0 <= self.theta <= 1:
            raise AdmissibilityError(f"theta must lie in [0, 1], got {self.theta}")
        if not self.stepsize > 0:
            raise AdmissibilityError("delta must be positive")
        if self.truncated and (self.radius is None or not self.radius >= 2):
            raise AdmissibilityError("truncated scheme needs a radius >= 2")

    @property
    def cutoff(self) -> Cutoff | None:
        return Cutoff(self.radius) if self.truncated else None

    @property
    def theta_delta(self) -> float:
        return self.theta * self.stepsize


def drift_of(problem: Problem, config: SchemeConfig) -> Callable[[Array], Array]:
    """b_delta when truncated, b otherwise."""
    if config.truncated:
        cut = config.cutoff
        return lambda x: truncated_drift(problem, cut, x)
    return problem.drift


def onesided_constant(problem: Problem, config: SchemeConfig, scale: float = 1.0) -> float:
    """Global one-sided constant of the drift in use.

    Untruncated drifts only have the local constant; ``scale`` is the radius
    it is evaluated at.
    """
    if config.truncated:
        return onesided_bound(problem, config.radius)
    return problem.M(scale)


def max_implicit_stepsize(problem: Problem, theta: float) -> float:
    """1/(2 theta L); infinite for the explicit scheme."""
    if theta == 0:
        return math.inf
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in [0, 1]")
    return 1.0 / (2.0 * theta * problem.growth_constant)


# ---------------------------------------------------------------------------
# Admissibility
# ---------------------------------------------------------------------------


@dataclass
class AdmissibilityReport:
    mode: str
    checks: list[tuple[str, bool, str]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def add(self, condition: str, ok: bool, detail: str, hard: bool = True):
        self.checks.append((condition, ok, detail))
        if not ok:
            if hard:
                raise AdmissibilityError(f"{condition} ({detail})")
            self.warnings.append(f"{condition} violated ({detail}); continuing in {self.mode} mode")

    def summary(self) -> str:
        lines = [f"admissibility ({self.mode} mode):"]
        for cond, ok, detail in self.checks:
            lines.append(f"  [{'ok' if ok else 'WARN'}] {cond}: {detail}")
        return "\n".join(lines)


def configure(
    problem: Problem,
    theta: float,
    delta: float,
    *,
    radius: float | None = None,
    schedule: TruncationSchedule | None = None,
    truncated: bool = True,
    **solver,
) -> tuple[SchemeConfig, AdmissibilityReport]:
    """Resolve a scheme configuration and check it before any simulation.

    Literal mode (no ``radius``): the radius is g(delta) from ``schedule``
    (default: the ln(1/delta)/16 schedule) and every condition is enforced.
    Pragmatic mode (explicit ``radius``): the schedule conditions and the
    strong-monotonicity margin only produce warnings. The stepsize bound
    theta*delta < 1/(2L) is always enforced.
    """
    L = problem.growth_constant
    if not truncated:
        mode = "untruncated"
    elif radius is None:
        mode = "literal"
    else:
        mode = "pragmatic"
    report = AdmissibilityReport(mode)

    report.add(
        "theta*delta must be < 1/(2L)",
        theta == 0 or theta * delta < 1.0 / (2.0 * L),
        f"theta*delta = {theta * delta:.6g}, 1/(2L) = {1.0 / (2.0 * L):.6g}",
    )

    if mode == "literal":
        schedule = schedule or default_schedule(problem)
        report.add(
            "delta must be <= delta1",
            delta <= schedule.delta1 * (1 + 1e-12),
            f"delta = {delta:.6g}, delta1 = {schedule.delta1:.6g}",
        )
        sched_report = validate_schedule(schedule, problem, [delta])
        report.add(
            "schedule conditions on g(delta)",
            sched_report.passed,
            "ok" if sched_report.passed else f"fails {sched_report.first_violation}",
        )
        try:
            radius = schedule.radius(delta)
        except ScheduleError as exc:
            raise AdmissibilityError(str(exc)) from None
    elif mode == "pragmatic":
        report.warnings.append(
            f"pragmatic radius {radius:g}: schedule conditions not enforced"
        )

    config = SchemeConfig(theta, delta, truncated, radius if truncated else None, **solver)

    if truncated:
        x0 = float(np.linalg.norm(problem.initial_state))
        report.add(
            "initial state must satisfy |x0| <= g(delta) - 1",
            x0 <= config.radius - 1,
            f"|x0| = {x0:.6g}, g(delta) = {config.radius:.6g}",
        )
        mbar = onesided_constant(problem, config)
        mu = 1.0 - config.theta_delta * mbar
        report.add(
            "mu = 1 - theta*delta*Mbar must be > 0",
            mu > 0,
            f"Mbar = {mbar:.6g}, mu = {mu:.6g}",
            hard=(mode == "literal"),
        )
    for w in report.warnings:
        warnings.warn(w, stacklevel=2)
    return config, report


# ---------------------------------------------------------------------------
# Implicit solver
# ---------------------------------------------------------------------------


def solve_implicit(
    c: Array,
    theta_delta: float,
    drift_map: Callable[[Array], Array],
    *,
    tolerance: float = 1e-12,
    max_iters: int = 200,
    damping: float = 1.0,
    initial: Array | None = None,
    memory: int = 5,
) -> tuple[Array, StepDiagnostics]:
    """Solve y - theta_delta * drift_map(y) = c for every row of ``c``.

    ``c`` has shape ``(..., n)``; rows are independent systems and each one
    stops updating as soon as its own residual norm drops below
    ``tolerance``, so a row's answer does not depend on its batch.

    The base iteration is the damped fixed point y <- y - damping*(F(y) - c).
    It is accelerated by a secant step when n = 1 and by Anderson mixing when
    n > 1; the plain damped step is taken whenever acceleration would
    increase the residual.
    """
    c = np.asarray(c, dtype=float)
    if not np.all(np.isfinite(c)):
        raise SolverError("non-finite right-hand side", StepDiagnostics(0, math.inf, False))
    if theta_delta == 0:
        return c.copy(), StepDiagnostics()

    shape = c.shape
    cc = c.reshape(-1, shape[-1])
    y = cc.copy() if initial is None else np.array(initial, dtype=float).reshape(cc.shape)

    def residual(v, rows=slice(None)):
        with np.errstate(all="ignore"):
            return v - theta_delta * drift_map(v) - cc[rows]

    if shape[-1] == 1:
        y, diag = _secant(y, residual, tolerance, max_iters, damping)
    else:
        y, diag = _anderson(y, residual, tolerance, max_iters, damping, memory)
    if not diag.residual <= tolerance:
        raise SolverError("implicit solve did not converge", diag)
    return y.reshape(shape), diag


def _norm(r):
    n = np.abs(r[:, 0]) if r.shape[1] == 1 else np.linalg.norm(r, axis=1)
    return np.where(np.isfinite(n), n, np.inf)


def _secant(y, residual, tol, max_iters, lam):
    """Secant iteration kept inside a sign bracket, bisecting when it stalls.

    In one dimension F(y) - c changes sign across the root, so the bracket
    guarantees convergence even where F is not monotone (then some root in the
    bracket is returned). The first trial point is the damped step.
    """
    r = residual(y)
    rn = _norm(r)
    active = rn > tol
    fallback = False
    lo, hi = _bracket(y, r, residual, active)
    y_prev = y - lam * r
    r_prev = residual(y_prev)
    y, r, y_prev, r_prev = y_prev, r_prev, y, r
    swap = _norm(r) > rn
    y[swap], r[swap], y_prev[swap], r_prev[swap] = y_prev[swap], r_prev[swap], y[swap], r[swap]
    lo, hi = _narrow(lo, hi, y, r)
    rn = _norm(r)
    active &= rn > tol
    stalled = np.zeros(len(y), dtype=bool)
    it = 1
    while it < max_iters and active.any():
        it += 1
        idx = np.flatnonzero(active)
        ya, ra, yp, rp = y[idx], r[idx], y_prev[idx], r_prev[idx]
        la, ha = lo[idx], hi[idx]
        denom = ra - rp
        with np.errstate(all="ignore"):
            cand = ya - ra * (ya - yp) / denom
        mid = 0.5 * (la + ha)
        bisect = stalled[idx][:, None] | ~np.isfinite(cand) | (denom == 0) | ~((cand > la) & (cand < ha))
        if bisect.any():
            fallback = True
        cand = np.where(bisect, mid, cand)
        rc = residual(cand, idx)
        la, ha = _narrow(la, ha, cand, rc)
        lo[idx], hi[idx] = la, ha
        rcn = _norm(rc)
        stalled[idx] = rcn > 0.5 * rn[idx]
        y_prev[idx], r_prev[idx] = ya, ra
        y[idx], r[idx] = cand, rc
        rn[idx] = rcn
        # stop once the residual is small or the bracket has no interior float
        active[idx] = (rcn > tol) & (np.nextafter(la, ha) < ha)[:, 0]
    return y, StepDiagnostics(it, float(rn.max(initial=0.0)), fallback)


def _narrow(lo, hi, y, r):
    neg = (r[:, 0] < 0)[:, None]
    pos = (r[:, 0] > 0)[:, None]
    lo = np.where(neg & (y > lo) & (y < hi), y, lo)
    hi = np.where(pos & (y > lo) & (y < hi), y, hi)
    return lo, hi


def _bracket(y, r, residual, active):
    """lo <= hi with residual(lo) <= 0 <= residual(hi), by doubling outwards."""
    width = 1.0 + np.abs(y)
    lo, hi = y - width, y + width
    rows = np.arange(len(y))
    for _ in range(1100):
        rlo, rhi = residual(lo, rows), residual(hi, rows)
        bad_lo = active[:, None] & ~(rlo <= 0)
        bad_hi = active[:, None] & ~(rhi >= 0)
        if not (bad_lo.any() or bad_hi.any()):
            return lo, hi
        width = np.where(bad_lo | bad_hi, 2 * width, width)
        lo = np.where(bad_lo, y - width, lo)
        hi = np.where(bad_hi, y + width, hi)
    raise SolverError("could not bracket the implicit equation", StepDiagnostics(0, math.inf, True))


def _anderson(y, residual, tol, max_iters, lam, memory):
    """Type-II Anderson mixing on g(y) = y - lam*(F(y) - c), batched over rows."""
    r = residual(y)
    rn = _norm(r)
    active = rn > tol
    N, n = y.shape
    fs, gs = [], []  # histories of f = g(y) - y and g(y), each (N, n)
    fallback = False
    it = 0
    while it < max_iters and active.any():
        it += 1
        f = -lam * r
        g = y + f
        fs.append(f)
        gs.append(g)
        if len(fs) > memory + 1:
            fs.pop(0)
            gs.pop(0)
        cand = g.copy()
        if len(fs) > 1:
            dF = np.stack([fs[i + 1] - fs[i] for i in range(len(fs) - 1)], axis=-1)  # (N, n, k)
            dG = np.stack([gs[i + 1] - gs[i] for i in range(len(gs) - 1)], axis=-1)
            A = np.einsum("nik,nij->nkj", dF, dF)
            k = A.shape[-1]
            reg = 1e-12 * (np.trace(A, axis1=1, axis2=2)[:, None, None] + 1e-300) * np.eye(k)
            rhs = np.einsum("nik,ni->nk", dF, f)
            with np.errstate(all="ignore"):
                gamma = np.linalg.solve(A + reg, rhs[..., None])[..., 0]
                mixed = g - np.einsum("nik,nk->ni", dG, gamma)
            ok = np.all(np.isfinite(mixed), axis=1)
            cand[ok] = mixed[ok]
        rc = residual(cand)
        worse = ~(_norm(rc) < rn)
        if (worse & active).any():
            fallback = True
        cand[worse] = g[worse]
        rc[worse] = residual(g[worse], np.flatnonzero(worse))
        # frozen rows keep their converged value
        y = np.where(active[:, None], cand, y)
        r = np.where(active[:, None], rc, r)
        rn = _norm(r)
        active = active & (rn > tol)
    return y, StepDiagnostics(it, float(rn.max(initial=0.0)), fallback)


# ---------------------------------------------------------------------------
# Steps
# ---------------------------------------------------------------------------


def _damping(problem: Problem, config: SchemeConfig, c: Array) -> float:
    scale = 1.0 + float(np.max(np.abs(c), initial=0.0))
    return 1.0 / (1.0 + config.theta_delta * max(onesided_constant(problem, config, scale), 0.0))


def noise_term(problem: Problem, y: Array, dW: Array) -> Array:
    return np.einsum("...ij,...j->...i", problem.diffusion(y), dW)


def theta_step(problem: Problem, config: SchemeConfig, y: Array, dW: Array) -> tuple[Array, StepDiagnostics]:
    """y_{k+1} = y_k + theta b(y_{k+1}) delta + (1-theta) b(y_k) delta + sigma(y_k) dW_k.

    b is the truncated drift when ``config.truncated``. Works on batches.
    """
    y = np.asarray(y, dtype=float)
    drift = drift_of(problem, config)
    delta = config.stepsize
    with np.errstate(all="ignore"):
        c = y + (1.0 - config.theta) * delta * drift(y) + noise_term(problem, y, np.asarray(dW, dtype=float))
    if config.theta == 0:
        return c, StepDiagnostics()
    return solve_implicit(
        c,
        config.theta_delta,
        drift,
        tolerance=config.solver_tolerance,
        max_iters=config.solver_max_iters,
        damping=_damping(problem, config, c),
    )


def transform_z(problem: Problem, config: SchemeConfig, y: Array) -> Array:
    """z = y - theta delta b(y); the implicit step inverts this map."""
    y = np.asarray(y, dtype=float)
    if config.theta == 0:
        return y.copy()
    return y - config.theta_delta * drift_of(problem, config)(y)


def invert_z(problem: Problem, config: SchemeConfig, z: Array) -> tuple[Array, StepDiagnostics]:
    drift = drift_of(problem, config)
    return solve_implicit(
        z,
        config.theta_delta,
        drift,
        tolerance=config.solver_tolerance,
        max_iters=config.solver_max_iters,
        damping=_damping(problem, config, z),
    )
