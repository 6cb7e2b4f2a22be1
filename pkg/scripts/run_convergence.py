"""Strong-error tables: GBM against its closed form, the cubic example against a fine reference."""

import argparse

from thetaem.experiments import Scheme, convergence_table, loglog_slope, strong_error_exact, strong_error_self
from thetaem.problem import builtin_example1, builtin_linear


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    common = dict(n_paths=args.paths, seed=args.seed, workers=args.workers)

    gbm = builtin_linear(0.5, 0.5, 1.0)
    rows = strong_error_exact(gbm, Scheme(1.0, truncated=False), [2.0**-k for k in range(4, 10)], **common)
    print("GBM a=0.5 s=0.5 x0=1, theta=1, exact reference")
    print(convergence_table(rows)[0])
    print(f"log-log slope: {loglog_slope(rows):.3f}\n")

    ex1 = builtin_example1()
    rows = strong_error_self(ex1, Scheme(1.0, 8.0), [2.0**-k for k in range(4, 9)], refinement=3, **common)
    print("example1 x0=1, theta=1, radius 8, reference at 2^-11")
    print(convergence_table(rows)[0])
    print(f"log-log slope: {loglog_slope(rows):.3f}")


if __name__ == "__main__":
    main()
