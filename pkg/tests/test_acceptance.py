"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected and shown in the pytest terminal summary.
"""

import math
import time
import warnings

import numpy as np
import pytest

from thetaem.cli import run
from thetaem.experiments import (
    Scheme,
    exit_probability,
    loglog_slope,
    strong_error_exact,
    strong_error_self,
    sup_moment,
)
from thetaem.problem import builtin_example1, builtin_linear
from thetaem.stepper import SchemeConfig, drift_of, invert_z, solve_implicit, transform_z
from thetaem.truncation import (
    Cutoff,
    default_schedule,
    global_onesided_constant,
    truncated_drift,
    validate_schedule,
)

from .conftest import ACCEPTANCE_LINES

EX1 = builtin_example1()
N = 100_000


def record(n, title, ok, detail, elapsed):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {title} ({detail}; {elapsed:.2f} s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_truncation_exactness():
    rng = np.random.default_rng(42)
    t0 = time.perf_counter()
    bad = 0
    for g in (2.0, 8.0):
        c = Cutoff(g)
        inside = rng.uniform(-(g - 1), g - 1, (N, 1))
        outside = rng.uniform(g, 10 * g, (N, 1)) * rng.choice([-1.0, 1.0], (N, 1))
        outside[outside == g] = np.nextafter(g, np.inf)
        bad += np.count_nonzero(truncated_drift(EX1, c, inside) != EX1.drift(inside))
        bad += np.count_nonzero(truncated_drift(EX1, c, outside) != 0.0)
    dt = time.perf_counter() - t0
    record(1, "truncated drift equals b inside, 0 outside", bad == 0 and dt < 1, f"{bad} mismatches", dt)


def test_criterion_02_truncated_growth_bounds():
    rng = np.random.default_rng(42)
    t0 = time.perf_counter()
    bad = 0
    for g in (2.0, 8.0):
        x = rng.uniform(-3 * g, 3 * g, (N, 1))
        bd = truncated_drift(EX1, Cutoff(g), x)
        bad += np.count_nonzero(np.sum(x * bd, -1) > 2 * (1 + np.sum(x * x, -1)))
        bad += np.count_nonzero(np.abs(bd[:, 0]) > 2 * (1 + np.abs(x[:, 0]) ** 3))
    dt = time.perf_counter() - t0
    record(2, "growth bounds of the truncated drift", bad == 0 and dt < 1, f"{bad} violations", dt)


def _ratio(c, x, y):
    db = truncated_drift(EX1, c, x) - truncated_drift(EX1, c, y)
    return np.sum((x - y) * db, -1) / np.sum((x - y) ** 2, -1)


def test_criterion_03_global_onesided_constant():
    rng = np.random.default_rng(42)
    sched = default_schedule(EX1)
    delta = math.exp(-32)
    g, mbar = sched.radius(delta), global_onesided_constant(sched, EX1, delta)
    c = sched.cutoff(delta)
    sign = lambda: rng.choice([-1.0, 1.0], (N, 1))
    t0 = time.perf_counter()
    both_in = _ratio(c, rng.uniform(-g, g, (N, 1)), rng.uniform(-g, g, (N, 1)))
    mixed = _ratio(c, rng.uniform(-g, g, (N, 1)), sign() * rng.uniform(g, 3 * g, (N, 1)) + 0.0)
    both_out = _ratio(c, sign() * rng.uniform(g * (1 + 1e-12), 3 * g, (N, 1)), sign() * rng.uniform(g * (1 + 1e-12), 3 * g, (N, 1)))
    dt = time.perf_counter() - t0
    worst = max(np.nanmax(both_in), np.nanmax(mixed))
    ok = worst <= mbar and np.all(both_out[np.isfinite(both_out)] == 0.0) and dt < 5
    record(3, "sampled one-sided ratio <= Mbar", ok, f"max ratio {worst:.4g} vs Mbar {mbar:g}, outside pairs max {np.nanmax(np.abs(both_out)):g}", dt)


def test_criterion_04_default_schedule():
    t0 = time.perf_counter()
    sched = default_schedule(EX1)
    grid = [math.exp(-32), math.exp(-40), math.exp(-64)]
    rep = validate_schedule(sched, EX1, grid)
    margins = []
    for d in grid:
        m = sched.radius(d)  # M_g = g for the default schedule's margin
        margins.append((m * math.exp(m) * d**0.25, d**0.125))
    dt = time.perf_counter() - t0
    ok = rep.passed and all(a <= b for a, b in margins) and dt < 1
    ok = ok and abs(margins[0][0] - 0.00496) < 5e-6 and abs(margins[0][1] - 0.0183) < 5e-5
    detail = ", ".join(f"{a:.3g} <= {b:.3g}" for a, b in margins)
    record(4, "default schedule admissible", ok, detail, dt)


def _bisect(f, lo, hi):
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_criterion_05_implicit_solver():
    rng = np.random.default_rng(42)
    t0 = time.perf_counter()
    g = 2.0
    mbar = global_onesided_constant(default_schedule(EX1), EX1, math.exp(-32))
    cfg = SchemeConfig(1.0, 0.01, radius=g)
    b = drift_of(EX1, cfg)
    worst_oracle = 0.0
    for _ in range(1000):
        c = rng.uniform(-2 * g, 2 * g)
        td = rng.uniform(0, 1 / mbar)
        y, _ = solve_implicit(np.array([c]), td, b)
        ref = _bisect(lambda v: v - td * b(np.array([v]))[0] - c, -abs(c) - g - 1, abs(c) + g + 1)
        worst_oracle = max(worst_oracle, abs(y[0] - ref))

    a = rng.uniform(-5, 5, 1000)
    td = rng.uniform(0, 0.09, 1000)
    c = rng.uniform(-10, 10, 1000)
    worst_closed = 0.0
    for ai, ti, ci in zip(a, td, c):
        y, _ = solve_implicit(np.array([ci]), ti, lambda v, ai=ai: ai * v)
        worst_closed = max(worst_closed, abs(y[0] - ci / (1 - ti * ai)))

    worst_trip = 0.0
    for theta in (0.5, 1.0):
        rt = SchemeConfig(theta, 1 / (theta * mbar), radius=g)
        ys = rng.uniform(-2 * g, 2 * g, (1000, 1))
        back, _ = invert_z(EX1, rt, transform_z(EX1, rt, ys))
        worst_trip = max(worst_trip, float(np.max(np.abs(back - ys))))
    dt = time.perf_counter() - t0
    ok = worst_oracle <= 1e-10 and worst_closed <= 1e-12 and worst_trip <= 1e-10 and dt < 10
    detail = f"oracle {worst_oracle:.2g}, closed form {worst_closed:.2g}, round trip {worst_trip:.2g}"
    record(5, "implicit solver accuracy", ok, detail, dt)


def test_criterion_06_exact_solution_convergence():
    gbm = builtin_linear(0.5, 0.5, 1.0)
    t0 = time.perf_counter()
    rows = strong_error_exact(gbm, Scheme(1.0, truncated=False), [2.0**-k for k in range(4, 10)], n_paths=1000, seed=42)
    dt = time.perf_counter() - t0
    errs = [r.strong_error_sq for r in rows]
    slope = loglog_slope(rows)
    ok = all(a > b for a, b in zip(errs, errs[1:])) and 0.7 <= slope <= 1.3 and dt < 60
    record(6, "GBM strong error decays", ok, f"slope {slope:.3f}, errors {', '.join(f'{e:.3g}' for e in errs)}", dt)


def test_criterion_07_self_convergence():
    t0 = time.perf_counter()
    rows = strong_error_self(EX1, Scheme(1.0, 8.0), [2.0**-k for k in range(4, 9)], refinement=3, n_paths=1000, seed=42)
    dt = time.perf_counter() - t0
    errs = [r.strong_error_sq for r in rows]
    ok = all(a > b for a, b in zip(errs, errs[1:])) and errs[-1] < errs[0] / 4 and dt < 120
    record(7, "coupled self-error decays", ok, f"errors {', '.join(f'{e:.3g}' for e in errs)}", dt)


def test_criterion_08a_moment_uniformity():
    t0 = time.perf_counter()
    moments = [sup_moment(EX1, Scheme(1.0, 8.0), 2.0**-k, p=4, n_paths=1000, seed=42).sup_moment for k in (4, 6, 8)]
    dt = time.perf_counter() - t0
    ratio = max(moments) / min(moments)
    ok = ratio <= 2 and dt < 60
    record("8a", "sup-moments uniform in delta", ok, f"moments {', '.join(f'{m:.4g}' for m in moments)}, ratio {ratio:.3f}", dt)


def test_criterion_08b_explicit_divergence_control():
    start = builtin_example1(3.0)
    t0 = time.perf_counter()
    worst = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for seed in range(100):
            m = sup_moment(start, Scheme(0.0, truncated=False), 2**-4, p=4, n_paths=1000, seed=seed).sup_moment
            worst = max(worst, m)
    dt = time.perf_counter() - t0
    ok = worst > 1e10 and dt < 60
    record("8b", "untruncated explicit control diverges on some seed", ok, f"largest moment over 100 seeds {worst:.4g}", dt)


def test_criterion_09_chebyshev_consistency():
    t0 = time.perf_counter()
    scheme = Scheme(1.0, 8.0)
    lines, ok = [], True
    from thetaem.brownian import sample_grid
    from thetaem.experiments import run_paths

    path = run_paths(EX1, scheme.config(EX1, 2**-8), sample_grid(42, 1.0, 2**-8, 1, 1000))
    for r in (2.0, 4.0, 8.0):
        est = exit_probability(EX1, scheme, 2**-8, r, p=4, path=path)
        ok &= est.estimate <= est.chebyshev_bound + 3 * est.std_error
        lines.append(f"r={r:g}: {est.estimate:.3f} <= {est.chebyshev_bound:.3g}")
    dt = time.perf_counter() - t0
    record(9, "exit probability below moment bound", ok and dt < 60, "; ".join(lines), dt)


@pytest.mark.parametrize(
    "argv",
    [
        ["converge", "--problem", "linear:0.5,0.5,1", "--deltas", "2^-4..2^-7"],
        ["moments"],
        ["exitprob"],
        ["simulate"],
    ],
    ids=["converge", "moments", "exitprob", "simulate"],
)
def test_criterion_10_reproducible_csv(argv, tmp_path, monkeypatch, capsys):
    t0 = time.perf_counter()
    blobs = []
    for run_dir in ("a", "b"):
        d = tmp_path / run_dir
        d.mkdir()
        monkeypatch.chdir(d)
        assert run(argv + ["--workers", "1", "--output", "out.csv"]) == 0
        blobs.append((d / "out.csv").read_bytes())
    dt = time.perf_counter() - t0
    record(10, f"{argv[0]} CSV bit-identical on rerun", blobs[0] == blobs[1] and dt < 60, f"{len(blobs[0])} bytes", dt)
