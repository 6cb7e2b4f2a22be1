"""Monte Carlo estimators: strong sup-errors, sup-moments and exit probabilities.

All estimators draw every path from one seeded batch at the finest stepsize
and coarsen it, so rows for different stepsizes share their Brownian paths.
Per-path statistics are reduced in path-index order, so results do not
depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .brownian import BrownianGrid, GridError, coarsen, path_values, sample_grid, step_count
from .problem import Problem
from .simulate import PathResult, first_exit_indices, simulate_path
from .stepper import SchemeConfig, configure

CSV_COLUMNS = ["experiment", "theta", "delta", "n_paths", "value", "std_error", "order", "radius", "seed"]


@dataclass
class ConvergenceRow:
    stepsize: float
    n_paths: int
    strong_error_sq: float
    std_error: float
    empirical_order: float | None = None


@dataclass
class MomentRow:
    stepsize: float
    p: float
    sup_moment: float
    std_error: float


class ExitEstimate(NamedTuple):
    estimate: float
    chebyshev_bound: float
    std_error: float


@dataclass(frozen=True)
class Scheme:
    """How to build a scheme for any stepsize: theta plus the truncation mode.

    ``radius`` set: pragmatic mode with that fixed radius. ``radius`` None and
    ``truncated``: literal mode (radius from the default schedule).
    """

    theta: float = 1.0
    radius: float | None = None
    truncated: bool = True

    def config(self, problem: Problem, delta: float) -> SchemeConfig:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cfg, _ = configure(problem, self.theta, delta, radius=self.radius, truncated=self.truncated)
        return cfg

    @classmethod
    def for_problem(cls, problem: Problem, theta: float = 1.0) -> "Scheme":
        """Pragmatic radius of the problem, or no truncation if it has none."""
        r = problem.pragmatic_radius
        return cls(theta=theta, radius=r, truncated=r is not None)


def default_workers() -> int:
    env = os.environ.get("THETAEM_WORKERS")
    return max(1, int(env)) if env else 1


def run_paths(problem: Problem, config: SchemeConfig, grid: BrownianGrid, workers: int = 1, **kw) -> PathResult:
    """simulate_path over a batch, split into contiguous chunks of paths."""
    n_paths = grid.batch_shape[0]
    if workers <= 1 or n_paths < 2 * workers:
        return simulate_path(problem, config, grid, **kw)
    bounds = np.linspace(0, n_paths, workers + 1).astype(int)
    chunks = [grid.take_paths(slice(a, b)) for a, b in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(workers) as pool:
        parts = list(pool.map(lambda g: simulate_path(problem, config, g, **kw), chunks))
    return PathResult(
        states=np.concatenate([p.states for p in parts]),
        stepsize=parts[0].stepsize,
        radius=parts[0].radius,
        exit_indices=np.concatenate([p.exit_indices for p in parts]),
        diagnostics=type(parts[0].diagnostics)(
            max(p.diagnostics.max_residual for p in parts),
            max(p.diagnostics.max_iterations for p in parts),
            sum(p.diagnostics.fallback_steps for p in parts),
        ),
        sup_norm=np.concatenate([p.sup_norm for p in parts]),
    )


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    n = len(values)
    mean = float(np.mean(values))
    if n < 2 or not np.all(np.isfinite(values)):
        return mean, (0.0 if n < 2 or mean == values[0] else math.inf)
    return mean, float(np.std(values, ddof=1) / math.sqrt(n))


def _check_deltas(deltas: Sequence[float], horizon: float, finest: float) -> list[int]:
    """Coarsening factor of every delta relative to ``finest``."""
    deltas = [float(d) for d in deltas]
    if not deltas:
        raise ValueError("need at least one stepsize")
    if any(a <= b for a, b in zip(deltas, deltas[1:])):
        raise ValueError("stepsizes must be strictly descending")
    factors = []
    for d in deltas:
        ratio = d / finest
        f = round(ratio)
        if abs(ratio - f) > 1e-9 * ratio or f & (f - 1):
            raise GridError(f"delta={d:g} is not a power-of-two multiple of {finest:g}")
        if abs(horizon / d - step_count(horizon, d)) > 1e-9 * horizon / d:
            raise GridError(f"delta={d:g} does not divide T={horizon:g}")
        factors.append(f)
    return factors


def _sup_sq(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        d = np.sum((a - b) ** 2, axis=-1)
    return np.where(np.isnan(d), np.inf, d).max(axis=-1)


def annotate_orders(rows: list[ConvergenceRow]) -> list[ConvergenceRow]:
    """empirical_order_i = log2(err_{i-1}/err_i) / log2(delta_{i-1}/delta_i)."""
    for i, row in enumerate(rows):
        if i == 0:
            row.empirical_order = None
            continue
        prev = rows[i - 1]
        with np.errstate(all="ignore"):
            if prev.strong_error_sq == row.strong_error_sq:
                row.empirical_order = 0.0
            else:
                row.empirical_order = float(
                    np.log2(prev.strong_error_sq / row.strong_error_sq) / np.log2(prev.stepsize / row.stepsize)
                )
    return rows


def loglog_slope(rows: Sequence[ConvergenceRow]) -> float:
    """Least-squares slope of log(error) against log(delta)."""
    x = np.log([r.stepsize for r in rows])
    y = np.log([r.strong_error_sq for r in rows])
    return float(np.polyfit(x, y, 1)[0])


def strong_error_exact(
    problem: Problem,
    scheme: Scheme,
    deltas: Sequence[float],
    n_paths: int = 1000,
    seed: int = 42,
    horizon: float = 1.0,
    workers: int = 1,
) -> list[ConvergenceRow]:
    """E sup_k |X(t_k) - Y_delta(t_k)|^2 against the closed-form solution."""
    if problem.exact_solution is None:
        raise ValueError(f"problem {problem.name!r} has no closed-form solution")
    finest = min(deltas)
    factors = _check_deltas(deltas, horizon, finest)
    fine = sample_grid(seed, horizon, finest, problem.dim_noise, n_paths)
    W = path_values(fine)
    rows = []
    for d, f in zip(deltas, factors):
        grid = coarsen(fine, f) if f > 1 else fine
        path = run_paths(problem, scheme.config(problem, d), grid, workers)
        t = np.arange(grid.steps + 1) * d
        exact = problem.exact_solution(t, W[:, ::f, :])
        mean, se = _mean_se(_sup_sq(exact, path.states))
        rows.append(ConvergenceRow(d, n_paths, mean, se))
    return annotate_orders(rows)


def strong_error_self(
    problem: Problem,
    scheme: Scheme,
    deltas: Sequence[float],
    refinement: int = 3,
    n_paths: int = 1000,
    seed: int = 42,
    horizon: float = 1.0,
    workers: int = 1,
) -> list[ConvergenceRow]:
    """E sup over coarse grid points |Y_ref - Y_delta|^2, Y_ref at min(deltas)/2^K.

    Every coarse run is driven by a coarsening of the reference increments.
    """
    ref_delta = min(deltas) / 2**refinement
    factors = _check_deltas(deltas, horizon, ref_delta)
    fine = sample_grid(seed, horizon, ref_delta, problem.dim_noise, n_paths)
    ref = run_paths(problem, scheme.config(problem, ref_delta), fine, workers)
    terminal = fine.terminal()
    rows = []
    for d, f in zip(deltas, factors):
        if f == 1:
            rows.append(ConvergenceRow(d, n_paths, 0.0, 0.0))
            continue
        grid = coarsen(fine, f)
        if not np.allclose(grid.terminal(), terminal, rtol=1e-12, atol=1e-12):
            raise AssertionError("coarse and reference grids do not end at the same W(T)")
        path = run_paths(problem, scheme.config(problem, d), grid, workers)
        mean, se = _mean_se(_sup_sq(ref.states[:, ::f, :], path.states))
        rows.append(ConvergenceRow(d, n_paths, mean, se))
    return annotate_orders(rows)


def _sup_pow(path: PathResult, p: float) -> np.ndarray:
    with np.errstate(over="ignore"):
        return path.sup_norm**p


def sup_moment(
    problem: Problem,
    scheme: Scheme,
    delta: float,
    p: float = 4.0,
    n_paths: int = 1000,
    seed: int = 42,
    horizon: float = 1.0,
    workers: int = 1,
) -> MomentRow:
    """Monte Carlo E sup_k |y_{t_k}|^p."""
    if p < 2:
        raise ValueError("moment order p must be >= 2")
    if not 0.5 <= scheme.theta <= 1:
        warnings.warn(f"theta={scheme.theta} is outside [1/2, 1]; moment bounds are not guaranteed", stacklevel=2)
    grid = sample_grid(seed, horizon, delta, problem.dim_noise, n_paths)
    path = run_paths(problem, scheme.config(problem, delta), grid, workers)
    mean, se = _mean_se(_sup_pow(path, p))
    return MomentRow(delta, p, mean, se)


def exit_probability(
    problem: Problem,
    scheme: Scheme,
    delta: float,
    exit_radius: float,
    p: float = 4.0,
    n_paths: int = 1000,
    seed: int = 42,
    horizon: float = 1.0,
    workers: int = 1,
    path: PathResult | None = None,
) -> ExitEstimate:
    """Fraction of paths reaching |y| >= exit_radius, with the Chebyshev bound
    E sup|y|^p / radius^p estimated from the same paths."""
    if path is None:
        grid = sample_grid(seed, horizon, delta, problem.dim_noise, n_paths)
        path = run_paths(problem, scheme.config(problem, delta), grid, workers)
    hits = first_exit_indices(path.states, exit_radius) >= 0
    est = float(np.mean(hits))
    moment = float(np.mean(_sup_pow(path, p)))
    return ExitEstimate(est, moment / exit_radius**p, math.sqrt(est * (1 - est) / len(hits)))


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def convergence_table(
    rows: Sequence[ConvergenceRow],
    *,
    experiment: str = "converge",
    theta: float | None = None,
    radius: float | None = None,
    seed: int | None = None,
) -> tuple[str, list[dict]]:
    """Formatted text table plus CSV records in the fixed column schema."""
    if not rows:
        raise ValueError("no rows")
    rows = annotate_orders(list(rows))
    lines = [f"{'delta':>12} {'N':>6} {'E sup|err|^2':>14} {'std err':>11} {'order':>7}"]
    records = []
    for r in rows:
        order = "" if r.empirical_order is None else f"{r.empirical_order:.3f}"
        lines.append(f"{r.stepsize:12.6g} {r.n_paths:6d} {r.strong_error_sq:14.6e} {r.std_error:11.3e} {order:>7}")
        records.append(
            dict(experiment=experiment, theta=theta, delta=r.stepsize, n_paths=r.n_paths,
                 value=r.strong_error_sq, std_error=r.std_error, order=r.empirical_order,
                 radius=radius, seed=seed)
        )
    return "\n".join(lines), records


def render_csv(records: Sequence[dict], config: dict | None = None) -> str:
    """CSV text: '# key=value' comment lines echoing ``config``, then header and rows."""
    buf = io.StringIO()
    for key, value in (config or {}).items():
        buf.write(f"# {key}={value}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in records:
        w.writerow([_fmt(rec.get(c)) if c not in ("experiment",) else rec[c] for c in CSV_COLUMNS])
    return buf.getvalue()
