import numpy as np
import pytest

from thetaem.problem import Problem, builtin_example1, builtin_linear

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def zero_problem(x0=(1.0,), m=1, diffusion=None) -> Problem:
    n = len(x0)
    return Problem(
        name="zero",
        dim_state=n,
        dim_noise=m,
        initial_state=np.array(x0, dtype=float),
        drift=lambda x: np.zeros_like(x),
        diffusion=diffusion or (lambda x: np.zeros(x.shape + (m,))),
        growth_constant=1.0,
        growth_exponent=1.0,
        local_onesided_constant=lambda r: 1.0,
    )


@pytest.fixture
def example1():
    return builtin_example1()


@pytest.fixture
def gbm():
    return builtin_linear(0.5, 0.5, 1.0)
