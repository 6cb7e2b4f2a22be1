"""Whole-path simulation, the continuous interpolant and exit indices."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .brownian import BrownianGrid, path_values
from .problem import Array, Problem
from .stepper import (
    SchemeConfig,
    SolverError,
    drift_of,
    invert_z,
    noise_term,
    theta_step,
    transform_z,
)


class SimulationError(RuntimeError):
    def __init__(self, step: int, cause: SolverError):
        super().__init__(f"solver failed at step {step}: {cause}")
        self.step = step
        self.diagnostics = cause.diagnostics


class TimeGridError(ValueError):
    pass


@dataclass(frozen=True)
class PathDiagnostics:
    max_residual: float
    max_iterations: int
    fallback_steps: int


@dataclass(frozen=True)
class PathResult:
    """States y_{t_0..t_M} for one path (``(M+1, n)``) or a batch (``(N, M+1, n)``).

    ``exit_indices`` holds, per path, the first k with |y_{t_k}| >= ``radius``
    and -1 when the path never gets there.
    """

    states: Array
    stepsize: float
    radius: float
    exit_indices: Array
    diagnostics: PathDiagnostics
    sup_norm: Array

    @property
    def steps(self) -> int:
        return self.states.shape[-2] - 1

    @property
    def exit_index(self) -> int | None:
        if self.exit_indices.ndim:
            raise ValueError("exit_index is only defined for a single path; use exit_indices")
        k = int(self.exit_indices)
        return None if k < 0 else k


def _norms(states: Array) -> Array:
    with np.errstate(all="ignore"):
        r = np.linalg.norm(states, axis=-1)
    return np.where(np.isnan(r), np.inf, r)


def first_exit_indices(states: Array, radius: float) -> Array:
    """First k with |states[..., k, :]| >= radius, -1 if none."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    hit = _norms(states) >= radius
    k = np.argmax(hit, axis=-1)
    return np.where(hit.any(axis=-1), k, -1)


def first_exit(states: Array, radius: float) -> int | None:
    """Minimal k with |states[k]| >= radius for a single path of shape (M+1, n)."""
    states = np.asarray(states, dtype=float)
    if states.ndim == 1:
        states = states[:, np.newaxis]
    k = int(first_exit_indices(states, radius))
    return None if k < 0 else k


def simulate_path(
    problem: Problem,
    config: SchemeConfig,
    grid: BrownianGrid,
    *,
    exit_radius: float | None = None,
    debug: bool = False,
) -> PathResult:
    """Iterate the theta step over every increment of ``grid``.

    Paths are not stopped at the truncation radius; ``exit_indices`` is
    metadata only. With ``debug`` the lower bound
    |z|^2 >= (1 - 2 theta L delta)|y|^2 - 2 theta L delta is asserted at
    every step.
    """
    if not math.isclose(grid.stepsize, config.stepsize, rel_tol=1e-12):
        raise ValueError(f"grid stepsize {grid.stepsize} != scheme stepsize {config.stepsize}")
    batch = grid.batch_shape
    n = problem.dim_state
    steps = grid.steps
    states = np.empty(batch + (steps + 1, n))
    states[..., 0, :] = problem.initial_state
    y = states[..., 0, :].reshape(-1, n)
    inc = grid.increments.reshape(-1, steps, grid.dim_noise)
    tld = 2.0 * config.theta * problem.growth_constant * config.stepsize

    max_res, max_it, fb = 0.0, 0, 0
    for k in range(steps):
        try:
            y, diag = theta_step(problem, config, y, inc[:, k, :])
        except SolverError as exc:
            raise SimulationError(k, exc) from exc
        max_res = max(max_res, diag.residual)
        max_it = max(max_it, diag.iterations)
        fb += diag.fallback_used
        if debug:
            z = transform_z(problem, config, y)
            y2, z2 = np.sum(y**2, axis=-1), np.sum(z**2, axis=-1)
            assert np.all(z2 >= (1 - tld) * y2 - tld - 1e-9 * (1 + y2)), f"|z|^2 lower bound fails at step {k}"
        states[..., k + 1, :] = y.reshape(batch + (n,))

    radius = exit_radius if exit_radius is not None else (config.radius if config.truncated else math.inf)
    return PathResult(
        states=states,
        stepsize=config.stepsize,
        radius=radius,
        exit_indices=first_exit_indices(states, radius) if math.isfinite(radius) else np.full(batch, -1),
        diagnostics=PathDiagnostics(max_res, max_it, fb),
        sup_norm=_norms(states).max(axis=-1),
    )


def piecewise_constant(path: PathResult, t: float) -> Array:
    """Left-continuous step interpolant; t = T maps to the last state."""
    horizon = path.steps * path.stepsize
    if t < 0 or t > horizon * (1 + 1e-12) + 1e-15:
        raise TimeGridError(f"t={t} outside [0, {horizon}]")
    k = min(int(math.floor(t / path.stepsize * (1 + 1e-12))), path.steps)
    return path.states[..., k, :]


def _fine_factor(config: SchemeConfig, fine: BrownianGrid) -> int:
    ratio = config.stepsize / fine.stepsize
    factor = round(ratio)
    if factor < 1 or abs(ratio - factor) > 1e-9 * ratio:
        raise TimeGridError("fine grid stepsize must divide the scheme stepsize")
    return factor


def interpolate_fine(problem: Problem, config: SchemeConfig, path: PathResult, fine: BrownianGrid) -> Array:
    """Y_delta at every time of ``fine`` (shape ``(..., M_fine+1, n)``).

    ``path`` must have been simulated on the coarsening of ``fine`` to the
    scheme stepsize. Between grid points Z(t) = Z(t_k) + b(y_k)(t - t_k) +
    sigma(y_k)(W(t) - W(t_k)) and Y(t) solves Y - theta delta b(Y) = Z(t);
    at grid points Y(t_k) = y_{t_k} is returned as is.
    """
    f = _fine_factor(config, fine)
    steps = path.steps
    if fine.steps != steps * f:
        raise TimeGridError("fine grid does not cover the simulated path")
    W = path_values(fine)  # (..., Mf+1, m)
    y = path.states[..., :steps, :]  # left endpoints
    drift = drift_of(problem, config)
    z = transform_z(problem, config, y)
    b = drift(y)
    out = np.empty(path.states.shape[:-2] + (steps * f + 1, problem.dim_state))
    out[..., ::f, :] = path.states
    for j in range(1, f):
        dt = j * fine.stepsize
        dw = W[..., j : steps * f : f, :] - W[..., 0 : steps * f : f, :]
        zt = z + b * dt + noise_term(problem, y, dw)
        yt, _ = invert_z(problem, config, zt)
        out[..., j : steps * f : f, :] = yt
    return out


def interpolate_continuous(problem: Problem, config: SchemeConfig, path: PathResult, fine: BrownianGrid, t: float) -> Array:
    """Y_delta(t) for a time t on the grid of ``fine``."""
    pos = t / fine.stepsize
    j = round(pos)
    if abs(pos - j) > 1e-9 * max(1.0, pos) or j < 0 or j > fine.steps:
        raise TimeGridError(f"t={t} is not a point of the fine grid (step {fine.stepsize})")
    f = _fine_factor(config, fine)
    k, rem = divmod(j, f)
    if rem == 0:
        return path.states[..., k, :].copy()
    W = path_values(fine)
    y = path.states[..., k, :]
    dw = W[..., j, :] - W[..., k * f, :]
    zt = transform_z(problem, config, y) + drift_of(problem, config)(y) * (rem * fine.stepsize) + noise_term(problem, y, dw)
    return invert_z(problem, config, zt)[0]


def write_path_csv(path: PathResult, out: str | Path) -> None:
    """Columns t, y_1..y_n, one row per grid point (single path only)."""
    if path.states.ndim != 2:
        raise ValueError("CSV dump needs a single path")
    n = path.states.shape[1]
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"y_{i + 1}" for i in range(n)])
        for k, row in enumerate(path.states):
            w.writerow([repr(k * path.stepsize)] + [repr(float(v)) for v in row])
