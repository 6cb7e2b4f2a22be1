"""Command-line driver.

    thetaem verify   --problem example1 --radius 2
    thetaem simulate --problem example1 --theta 1 --delta 2^-8
    thetaem converge --problem linear:0.5,0.5,1 --deltas 2^-4..2^-9
    thetaem moments  --problem example1 --deltas 2^-4,2^-6,2^-8 --p 4
    thetaem exitprob --problem example1 --delta 2^-8 --radii 2,4,8

Exit codes: 0 success, 1 runtime failure (solver), 2 configuration error.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
import warnings

import numpy as np

from . import __version__
from .brownian import GridError, sample_grid
from .experiments import (
    Scheme,
    convergence_table,
    exit_probability,
    render_csv,
    run_paths,
    strong_error_exact,
    strong_error_self,
    sup_moment,
)
from .problem import Problem, check_a1, check_a2, get_problem, sample_ball
from .simulate import SimulationError, simulate_path, write_path_csv
from .stepper import AdmissibilityError, SolverError, configure, max_implicit_stepsize
from .truncation import (
    CUTOFF_LIPSCHITZ,
    ScheduleError,
    get_schedule,
    onesided_bound,
    validate_schedule,
)


class ConfigError(ValueError):
    pass


_POW2 = re.compile(r"^2\^(-?\d+)$")


def parse_number(text: str) -> float:
    m = _POW2.match(text.strip())
    return 2.0 ** int(m.group(1)) if m else float(text)


def parse_deltas(text: str) -> list[float]:
    """'2^-4..2^-9' (dyadic range, both ends included) or a comma list."""
    if ".." in text:
        a, b = (s.strip() for s in text.split("..", 1))
        ma, mb = _POW2.match(a), _POW2.match(b)
        if not (ma and mb):
            raise ConfigError(f"range {text!r} must look like 2^-a..2^-b")
        lo, hi = int(ma.group(1)), int(mb.group(1))
        step = -1 if hi < lo else 1
        return [2.0**k for k in range(lo, hi + step, step)]
    return [parse_number(s) for s in text.split(",") if s.strip()]


def _radius_mode(args, problem: Problem) -> tuple[float | None, bool]:
    """(radius, truncated) from --radius: auto | literal | none | <float>."""
    mode = args.radius
    if mode == "auto":
        r = problem.pragmatic_radius
        return r, r is not None
    if mode == "literal":
        return None, True
    if mode == "none":
        return None, False
    try:
        return float(mode), True
    except ValueError:
        raise ConfigError(f"--radius must be auto, literal, none or a number, got {mode!r}") from None


def _resolve(args, problem: Problem, deltas: list[float]) -> tuple[Scheme, list]:
    """Admissibility of every stepsize, checked before any path is simulated."""
    radius, truncated = _radius_mode(args, problem)
    schedule = get_schedule(args.schedule, problem) if truncated and radius is None else None
    reports = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for d in deltas:
            _, rep = configure(problem, args.theta, d, radius=radius, schedule=schedule, truncated=truncated)
            reports.append((d, rep))
    return Scheme(args.theta, radius, truncated), reports


def _print_admissibility(problem: Problem, args, reports) -> None:
    print(f"problem {problem.name}: L={problem.growth_constant:g}, l={problem.growth_exponent:g}, x0={problem.initial_state.tolist()}")
    print(f"max stepsize for theta={args.theta:g}: 1/(2 theta L) = {max_implicit_stepsize(problem, args.theta):.6g}")
    for d, rep in reports:
        print(f"delta={d:.6g}: " + rep.summary())
        for w in rep.warnings:
            print(f"  warning: {w}")


def _echo(args, problem: Problem, scheme: Scheme) -> dict:
    return {
        "version": __version__,
        "subcommand": args.command,
        "problem": args.problem,
        "problem_name": problem.name,
        "x0": problem.initial_state.tolist(),
        "theta": args.theta,
        "T": args.T,
        "seed": args.seed,
        "n_paths": getattr(args, "paths", None),
        "radius_mode": args.radius,
        "radius": scheme.radius,
        "truncated": scheme.truncated,
        "schedule": args.schedule,
        **{k: getattr(args, k) for k in ("delta", "deltas", "refine", "reference", "p", "radii") if hasattr(args, k)},
    }


def _write(args, text: str) -> None:
    with open(args.output, "w", newline="") as fh:
        fh.write(text)
    print(f"wrote {args.output}")


def _load_problem(args) -> Problem:
    problem = get_problem(args.problem)
    if args.x0 is not None:
        problem = problem.with_initial_state([args.x0] * problem.dim_state)
    return problem


def cmd_verify(args) -> int:
    problem = _load_problem(args)
    rng = np.random.default_rng(args.seed)
    n = problem.dim_state
    pts = np.linspace(-10, 10, args.samples)[:, None] if n == 1 else sample_ball(rng, n, args.samples, 10.0)
    print("growth condition (sampled on |x| <= 10):")
    print(check_a1(problem, pts).summary())
    R = args.radius
    xs, ys = sample_ball(rng, n, args.samples, R), sample_ball(rng, n, args.samples, R)
    keep = np.any(xs != ys, axis=-1)
    print(f"local one-sided condition (sampled pairs in the {R:g}-ball, M_R = {problem.M(R):g}):")
    print(check_a2(problem, R, (xs[keep], ys[keep])).summary())
    if R >= 2:
        print(f"cutoff at radius {R:g}: C_zeta = {CUTOFF_LIPSCHITZ:g}, Mbar = {onesided_bound(problem, R):.6g}")
    try:
        sched = get_schedule(args.schedule, problem)
        print(f"schedule {sched.name}: delta1 = {sched.delta1:.6g}; " + validate_schedule(sched, problem).summary())
    except ScheduleError as exc:
        print(f"schedule {args.schedule}: {exc}")
    return 0


def cmd_simulate(args) -> int:
    problem = _load_problem(args)
    delta = parse_number(args.delta)
    scheme, reports = _resolve(args, problem, [delta])
    _print_admissibility(problem, args, reports)
    grid = sample_grid(args.seed, args.T, delta, problem.dim_noise)
    path = simulate_path(problem, scheme.config(problem, delta), grid)
    print(f"steps={path.steps} sup|y|={float(path.sup_norm):.6g} exit_index={path.exit_index} "
          f"max_residual={path.diagnostics.max_residual:.3g} max_iterations={path.diagnostics.max_iterations}")
    write_path_csv(path, args.output)
    print(f"wrote {args.output}")
    return 0


def cmd_converge(args) -> int:
    problem = _load_problem(args)
    deltas = sorted(parse_deltas(args.deltas), reverse=True)
    reference = args.reference
    if reference == "auto":
        reference = "exact" if problem.exact_solution is not None else "self"
    all_deltas = deltas + ([min(deltas) / 2**args.refine] if reference == "self" else [])
    scheme, reports = _resolve(args, problem, all_deltas)
    _print_admissibility(problem, args, reports)
    common = dict(n_paths=args.paths, seed=args.seed, horizon=args.T, workers=args.workers)
    if reference == "exact":
        rows = strong_error_exact(problem, scheme, deltas, **common)
    else:
        rows = strong_error_self(problem, scheme, deltas, refinement=args.refine, **common)
    text, records = convergence_table(rows, experiment=f"converge_{reference}", theta=args.theta,
                                      radius=scheme.radius, seed=args.seed)
    print(text)
    _write(args, render_csv(records, _echo(args, problem, scheme)))
    return 0


def cmd_moments(args) -> int:
    problem = _load_problem(args)
    deltas = sorted(parse_deltas(args.deltas), reverse=True)
    scheme, reports = _resolve(args, problem, deltas)
    _print_admissibility(problem, args, reports)
    records = []
    print(f"{'delta':>12} {'E sup|y|^p':>14} {'std err':>11}")
    for d in deltas:
        row = sup_moment(problem, scheme, d, args.p, args.paths, args.seed, args.T, args.workers)
        print(f"{d:12.6g} {row.sup_moment:14.6e} {row.std_error:11.3e}")
        records.append(dict(experiment="moments", theta=args.theta, delta=d, n_paths=args.paths,
                            value=row.sup_moment, std_error=row.std_error, radius=scheme.radius, seed=args.seed))
    _write(args, render_csv(records, _echo(args, problem, scheme)))
    return 0


def cmd_exitprob(args) -> int:
    problem = _load_problem(args)
    delta = parse_number(args.delta)
    scheme, reports = _resolve(args, problem, [delta])
    _print_admissibility(problem, args, reports)
    radii = [float(r) for r in args.radii.split(",")]
    grid = sample_grid(args.seed, args.T, delta, problem.dim_noise, args.paths)
    path = run_paths(problem, scheme.config(problem, delta), grid, args.workers)
    records = []
    print(f"{'radius':>8} {'P(exit)':>10} {'std err':>10} {'E sup|y|^p/r^p':>15}")
    for r in radii:
        est = exit_probability(problem, scheme, delta, r, args.p, path=path)
        print(f"{r:8g} {est.estimate:10.4f} {est.std_error:10.4f} {est.chebyshev_bound:15.6g}")
        base = dict(theta=args.theta, delta=delta, n_paths=args.paths, radius=r, seed=args.seed)
        records.append(dict(experiment="exitprob", value=est.estimate, std_error=est.std_error, **base))
        records.append(dict(experiment="exitprob_bound", value=est.chebyshev_bound, **base))
    _write(args, render_csv(records, _echo(args, problem, scheme)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thetaem", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scheme_radius=True):
        p.add_argument("--problem", default="example1", help="example1, example1:x0, linear:a,s,x0")
        p.add_argument("--x0", type=float, default=None, help="override the initial state")
        p.add_argument("--theta", type=float, default=1.0)
        p.add_argument("--T", type=float, default=1.0)
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--schedule", default="remark22", help="remark22 or log:c (literal radius mode)")
        if scheme_radius:
            p.add_argument("--radius", default="auto",
                           help="auto (problem's pragmatic radius), literal (schedule g(delta)), none, or a number")
        p.add_argument("--workers", type=int,
                       default=int(os.environ.get("THETAEM_WORKERS", os.cpu_count() or 1)))

    p = sub.add_parser("verify", help="sampled audit of the assumptions, cutoff and schedule")
    common(p, scheme_radius=False)
    p.add_argument("--radius", type=float, default=2.0, help="ball radius for the one-sided check")
    p.add_argument("--samples", type=int, default=10_000)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="simulate one path and dump it as CSV")
    common(p)
    p.add_argument("--delta", default="2^-8")
    p.add_argument("--output", default="path.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("converge", help="strong sup-error table")
    common(p)
    p.add_argument("--deltas", default="2^-4..2^-8")
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--reference", choices=["auto", "exact", "self"], default="auto")
    p.add_argument("--refine", type=int, default=3, help="reference is min(delta)/2^refine (self mode)")
    p.add_argument("--output", default="converge.csv")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("moments", help="E sup|y|^p across stepsizes")
    common(p)
    p.add_argument("--deltas", default="2^-4,2^-6,2^-8")
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--p", type=float, default=4.0)
    p.add_argument("--output", default="moments.csv")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("exitprob", help="exit probabilities against the moment bound")
    common(p)
    p.add_argument("--delta", default="2^-8")
    p.add_argument("--radii", default="2,4,8")
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--p", type=float, default=4.0)
    p.add_argument("--output", default="exitprob.csv")
    p.set_defaults(func=cmd_exitprob)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, AdmissibilityError, ScheduleError, GridError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SimulationError, SolverError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
