import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from thetaem.problem import builtin_example1
from thetaem.truncation import (
    CUTOFF_LIPSCHITZ,
    Cutoff,
    ScheduleError,
    TruncationSchedule,
    cutoff_value,
    default_schedule,
    global_onesided_constant,
    log_schedule,
    transition_profile,
    transition_profile_derivative,
    truncated_drift,
    validate_schedule,
)

from .conftest import zero_problem

EX1 = builtin_example1()
GRID = [math.exp(-32), math.exp(-40), math.exp(-64)]


def test_default_schedule_values():
    s = default_schedule(EX1)
    assert s.delta1 == math.exp(-32)
    assert s.radius(math.exp(-32)) == pytest.approx(2.0, abs=1e-14)
    assert s.radius(math.exp(-64)) == pytest.approx(4.0, abs=1e-14)


def test_default_schedule_stability_margin():
    d = math.exp(-32)
    m = 2.0  # M_g = g at delta1
    value = m * math.exp(m) * d**0.25
    assert value == pytest.approx(0.00496, abs=5e-6)
    assert value <= d**0.125 < 1
    assert d**0.125 == pytest.approx(0.0183, abs=5e-5)


def test_validate_default_schedule_on_grid():
    s = default_schedule(EX1)
    assert validate_schedule(s, EX1, GRID).passed
    m_equals_g = TruncationSchedule(s.delta1, s.g, m_of_g=lambda g: g)
    assert validate_schedule(m_equals_g, EX1, GRID).passed
    assert validate_schedule(s, EX1).passed  # default 64-point grid


def test_validate_rejects_constant_schedule():
    const = TruncationSchedule(math.exp(-32), lambda d: 2.0, EX1.M)
    rep = validate_schedule(const, EX1, GRID)
    assert not rep.passed
    assert "decreasing" in rep.first_violation[1]


def test_validate_rejects_fast_growth():
    fast = TruncationSchedule(math.exp(-32), lambda d: 1.0 / d, lambda g: 1.0)
    rep = validate_schedule(fast, EX1, GRID)
    assert not rep.passed
    assert rep.first_violation == (math.exp(-32), "g(delta)^l delta <= 1")


def test_default_schedule_needs_linear_onesided_growth():
    p = builtin_example1()
    quad = type(p)(**{**p.__dict__, "local_onesided_constant": lambda r: r * r})
    with pytest.raises(ScheduleError):
        default_schedule(quad)


def test_log_schedule_domain():
    s = log_schedule(EX1, 0.125)
    assert s.radius(s.delta1) == pytest.approx(2.0)
    with pytest.raises(ScheduleError):
        s.radius(2 * s.delta1)
    with pytest.raises(ScheduleError):
        global_onesided_constant(s, EX1, 1.0)


def test_cutoff_examples():
    c = Cutoff(2.0)
    assert cutoff_value(c, np.array([0.5])) == 1.0
    assert cutoff_value(c, np.array([3.0])) == 0.0
    assert cutoff_value(c, np.array([1.5])) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        Cutoff(1.5)


def test_truncated_drift_examples():
    c = Cutoff(2.0)
    assert truncated_drift(EX1, c, np.array([1.0]))[0] == 0.0
    assert truncated_drift(EX1, c, np.array([5.0]))[0] == 0.0
    assert truncated_drift(EX1, c, np.array([0.0]))[0] == EX1.drift(np.array([0.0]))[0]
    # total even where b overflows
    assert truncated_drift(EX1, c, np.array([1e200]))[0] == 0.0


def test_global_onesided_constant_example1():
    s = default_schedule(EX1)
    mbar = global_onesided_constant(s, EX1, math.exp(-32))
    assert mbar == pytest.approx(5 + 18 * CUTOFF_LIPSCHITZ)
    # b = 0 has one-sided constant 0
    z = zero_problem()
    x, y = np.random.default_rng(0).uniform(-3, 3, (2, 1000, 1))
    db = truncated_drift(z, Cutoff(2.0), x) - truncated_drift(z, Cutoff(2.0), y)
    assert np.max(np.sum((x - y) * db, -1)) == 0.0 <= mbar


def test_sampled_onesided_ratio_below_mbar():
    s = default_schedule(EX1)
    d = math.exp(-32)
    g, mbar = s.radius(d), global_onesided_constant(s, EX1, d)
    rng = np.random.default_rng(11)
    x, y = rng.uniform(-g, g, (2, 100_000, 1))
    c = s.cutoff(d)
    ratio = np.sum((x - y) * (truncated_drift(EX1, c, x) - truncated_drift(EX1, c, y)), -1) / np.sum((x - y) ** 2, -1)
    assert ratio.max() <= mbar


radii = st.floats(2.0, 50.0)
points = st.floats(-100.0, 100.0, allow_nan=False)


@given(radii, points)
def test_identity_and_support(radius, x):
    c = Cutoff(radius)
    v = np.array([x])
    got = truncated_drift(EX1, c, v)
    if abs(x) <= radius - 1:
        assert got[0] == EX1.drift(v)[0]
    if abs(x) > radius:
        assert got[0] == 0.0


@given(radii, points, points)
def test_cutoff_bounds_and_radial_monotonicity(radius, x, y):
    c = Cutoff(radius)
    zx, zy = cutoff_value(c, np.array([x])), cutoff_value(c, np.array([y]))
    assert 0.0 <= zx <= 1.0
    if abs(x) <= abs(y):
        assert zx >= zy


@given(radii, points)
def test_truncated_drift_keeps_growth_bounds(radius, x):
    v = np.array([x])
    bd = truncated_drift(EX1, Cutoff(radius), v)[0]
    assert x * bd <= 2 * (1 + x * x) * (1 + 1e-12)
    assert abs(bd) <= 2 * (1 + abs(x) ** 3) * (1 + 1e-12)


@given(st.floats(-1.0, 2.0))
def test_profile_symmetry(s):
    assert transition_profile(s) + transition_profile(1 - s) == pytest.approx(1.0, abs=1e-15)


def test_profile_finite_differences_are_second_order():
    s = np.linspace(0.05, 0.95, 91)
    exact = transition_profile_derivative(s)
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        fd = (transition_profile(s + h) - transition_profile(s - h)) / (2 * h)
        errs.append(np.max(np.abs(fd - exact)))
    for a, b in zip(errs, errs[1:]):
        assert 3.5 < a / b < 4.5


def test_profile_derivative_sup_is_lipschitz_constant():
    s = np.linspace(1e-4, 1 - 1e-4, 200_001)
    d = transition_profile_derivative(s)
    assert d.max() == pytest.approx(2.0, abs=1e-8)
    assert d.max() <= CUTOFF_LIPSCHITZ + 1e-12


def test_measured_cutoff_lipschitz():
    c = Cutoff(3.0)
    rng = np.random.default_rng(5)
    x = rng.uniform(-4, 4, (200_000, 1))
    y = x + rng.normal(scale=1e-3, size=x.shape)
    q = np.abs(cutoff_value(c, x) - cutoff_value(c, y)) / np.abs(x - y)[:, 0]
    assert q.max() <= CUTOFF_LIPSCHITZ
