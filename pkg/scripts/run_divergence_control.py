"""How often does untruncated explicit Euler (theta = 0) blow up on the cubic example?

Counts paths whose running maximum passes a threshold beyond which the explicit
step keeps growing (|y| > sqrt(2/delta) roughly doubles the cubic overshoot).
"""

import argparse
import math
import warnings

import numpy as np

from thetaem.brownian import sample_grid
from thetaem.experiments import Scheme, run_paths
from thetaem.problem import builtin_example1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--x0", type=float, default=3.0)
    ap.add_argument("--delta", type=float, default=2.0**-4)
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--paths", type=int, default=1000)
    ap.add_argument("--threshold", type=float, default=1e10, help="moment level counted as divergence")
    args = ap.parse_args()
    problem = builtin_example1(args.x0)
    blow = math.sqrt(2.0 / args.delta)
    moments, exploded = [], 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for seed in range(args.seeds):
            cfg = Scheme(0.0, truncated=False).config(problem, args.delta)
            path = run_paths(problem, cfg, sample_grid(seed, 1.0, args.delta, 1, args.paths))
            exploded += int(np.count_nonzero(path.sup_norm > blow))
            with np.errstate(over="ignore"):
                moments.append(float(np.mean(path.sup_norm**4)))
    total = args.seeds * args.paths
    print(f"paths: {total}, paths beyond sqrt(2/delta) = {blow:.3g}: {exploded}")
    print(f"largest per-seed E sup|y|^4: {max(moments):.4g}; seeds above {args.threshold:g}: "
          f"{sum(m > args.threshold for m in moments)}")


if __name__ == "__main__":
    main()
