"""Exit probabilities of the cubic example next to the moment (Chebyshev) bound."""

import argparse

from thetaem.brownian import sample_grid
from thetaem.experiments import Scheme, exit_probability, run_paths
from thetaem.problem import builtin_example1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--delta", type=float, default=2.0**-8)
    ap.add_argument("--p", type=float, default=4.0)
    args = ap.parse_args()
    ex1 = builtin_example1()
    scheme = Scheme(1.0, 8.0)
    path = run_paths(ex1, scheme.config(ex1, args.delta), sample_grid(args.seed, 1.0, args.delta, 1, args.paths))
    print(f"{'radius':>7} {'P(exit)':>9} {'std err':>9} {'bound':>10}")
    for r in (1.5, 2.0, 3.0, 4.0, 8.0):
        est = exit_probability(ex1, scheme, args.delta, r, args.p, path=path)
        print(f"{r:7g} {est.estimate:9.4f} {est.std_error:9.4f} {est.chebyshev_bound:10.4g}")


if __name__ == "__main__":
    main()
