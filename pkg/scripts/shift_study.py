#!/usr/bin/env python3
"""A-posteriori shift selection workflow on the grid Laplacian.

Runs the unshifted pipelined solver to collect its scalar coefficients,
sweeps the rounding-error amplification factor over a shift grid, picks a
shift, and re-runs the shifted variant with it to show the restored
accuracy.  The sweep can be written as a (sigma, psi) CSV for plotting.
"""

import argparse

import numpy as np

from kpl import (CoefficientHistory, SolverConfig, amplification_factor,
                 default_sigma_grid, laplacian_2d, select_shift, solve)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=int, default=200)
    ap.add_argument("--maxit", type=int, default=500)
    ap.add_argument("--sigma-grid", metavar="LO:STEP:HI",
                    help="sweep grid (default derived from the operator)")
    ap.add_argument("--output", metavar="PATH", help="write sigma,psi CSV here")
    args = ap.parse_args()

    A = laplacian_2d(args.grid, args.grid)
    b = np.full(A.n, 1.0 / np.sqrt(A.n))

    baseline = solve(A, None, b, None,
                     SolverConfig(method="pcg", max_iters=args.maxit))
    print(f"baseline pipelined run: final true residual "
          f"{baseline.history[-1].rnorm_true:.3e}")

    hist = CoefficientHistory.from_result(baseline)
    if args.sigma_grid:
        lo, step, hi = (float(x) for x in args.sigma_grid.split(":"))
        grid = lo + step * np.arange(int(round((hi - lo) / step)) + 1)
    else:
        grid = default_sigma_grid(A)
    sweep = select_shift(hist, args.maxit, grid)
    psi0 = amplification_factor(hist, args.maxit, 0.0)
    print(f"amplification at shift 0: {psi0:.3e}")
    print(f"grid minimum: shift {sweep.argmin:g} "
          f"(psi {sweep.psi_values.min():.3e})")
    # prefer a margin from the blowup edge: smallest shift within 4x of the
    # grid minimum
    floor = 4.0 * sweep.psi_values.min()
    chosen = float(sweep.grid[np.argmax(sweep.psi_values <= floor)])
    print(f"chosen shift: {chosen:g} "
          f"(psi {sweep.psi_values[list(sweep.grid).index(chosen)]:.3e})")

    if args.output:
        with open(args.output, "w", encoding="ascii") as fh:
            fh.write("sigma,psi\n")
            for s, v in zip(sweep.grid, sweep.psi_values):
                fh.write("%.17g,%.17g\n" % (s, v))
        print(f"sweep written to {args.output}")

    shifted = solve(A, None, b, None,
                    SolverConfig(method="pcg_sh", shift=chosen,
                                 max_iters=args.maxit))
    print(f"shifted run (shift {chosen:g}): final true residual "
          f"{shifted.history[-1].rnorm_true:.3e}")


if __name__ == "__main__":
    main()
