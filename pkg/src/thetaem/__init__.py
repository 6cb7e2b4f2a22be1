"""Modified (truncated) theta-Euler-Maruyama scheme for SDEs with locally
one-sided Lipschitz drift, plus Monte Carlo convergence experiments."""

__version__ = "0.1.0"

from .brownian import BrownianGrid, coarsen, path_values, sample_grid
from .problem import Problem, builtin_example1, builtin_linear, check_a1, check_a2, get_problem
from .simulate import PathResult, simulate_path
from .stepper import SchemeConfig, configure, solve_implicit, theta_step
from .truncation import Cutoff, TruncationSchedule, default_schedule, truncated_drift

__all__ = [
    "BrownianGrid", "Cutoff", "PathResult", "Problem", "SchemeConfig", "TruncationSchedule",
    "builtin_example1", "builtin_linear", "check_a1", "check_a2", "coarsen", "configure",
    "default_schedule", "get_problem", "path_values", "sample_grid", "simulate_path",
    "solve_implicit", "theta_step", "truncated_drift",
]
