"""Sup-moments E sup|y|^p of the cubic example for several theta and stepsizes."""

import argparse

from thetaem.experiments import Scheme, sup_moment
from thetaem.problem import builtin_example1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--p", type=float, default=4.0)
    ap.add_argument("--radius", type=float, default=8.0)
    args = ap.parse_args()
    ex1 = builtin_example1()
    print(f"{'theta':>6} {'delta':>10} {'E sup|y|^p':>12} {'std err':>10}")
    for theta in (0.5, 0.75, 1.0):
        for k in (4, 6, 8):
            row = sup_moment(ex1, Scheme(theta, args.radius), 2.0**-k, args.p, args.paths, args.seed)
            print(f"{theta:6g} {row.stepsize:10.6g} {row.sup_moment:12.5g} {row.std_error:10.3g}")


if __name__ == "__main__":
    main()
