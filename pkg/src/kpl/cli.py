"""Command line front end: solve, analyze-shift, fetch, gen, bench."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .harness import (REFERENCE_BENCHMARKS, RunConfig, fetch_matrix, load_matrix,
                      parse_sigma_grid, run_analyze_shift, run_benchmark_suite,
                      run_solve)
from .mmio import write_matrix_market
from .solvers import DEFAULT_RR_THRESHOLD, SolverConfig
from .stability import default_sigma_grid

_METHOD_MAP = {
    "cg": "cg", "pcg": "pcg", "pcg-sh": "pcg_sh",
    "pcg-var-sh": "pcg_var_sh", "pcg-rr": "pcg_rr",
}


def _read_schedule(path: str) -> tuple[float, ...]:
    with open(path, encoding="ascii") as fh:
        return tuple(float(line) for line in fh if line.strip())


def _add_solve_args(p: argparse.ArgumentParser):
    p.add_argument("--matrix", required=True,
                   help="Matrix Market path, lapl:<NX>x<NY>, or rand:<N>[:<COND>]")
    p.add_argument("--rhs", choices=["ones-solution", "ones-rhs"],
                   default="ones-solution")
    p.add_argument("--precond", choices=["none", "jacobi", "ic0"], default="none")
    p.add_argument("--ic-shift", type=float, default=0.0, metavar="ETA",
                   help="diagonal compensation for ic0")
    p.add_argument("--method", choices=sorted(_METHOD_MAP), default="cg")
    p.add_argument("--shift", type=float, default=0.0, metavar="SIGMA")
    p.add_argument("--shift-schedule", metavar="FILE",
                   help="one shift per line; first entry applies before iteration 0")
    p.add_argument("--maxit", type=int, default=100)
    p.add_argument("--rtol", type=float, default=0.0,
                   help="relative recursive-residual tolerance, 0 disables")
    p.add_argument("--track-gaps", action="store_true")
    p.add_argument("--rr-threshold", type=float, default=DEFAULT_RR_THRESHOLD,
                   help="replacement trigger threshold for pcg-rr")
    p.add_argument("--history", metavar="PATH", help="emit iteration history here")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--seed", type=int, default=0, help="seed for rand: sources")


def _cmd_solve(args) -> int:
    schedule = _read_schedule(args.shift_schedule) if args.shift_schedule else None
    solver = SolverConfig(
        method=_METHOD_MAP[args.method],
        shift=args.shift,
        shift_schedule=schedule,
        max_iters=args.maxit,
        rtol=args.rtol,
        track_gaps=args.track_gaps,
        rr_threshold=args.rr_threshold,
    )
    cfg = RunConfig(
        matrix_source=args.matrix,
        rhs_mode=args.rhs.replace("-", "_"),
        precond=args.precond,
        ic_eta=args.ic_shift,
        solver=solver,
        output_format=args.format,
        output_path=args.history,
        seed=args.seed,
    )
    result, _, _, _ = run_solve(cfg)
    last = result.history[-1]
    print(f"method={args.method} n-iterations={result.iterations} "
          f"converged={result.converged}")
    print(f"recursive residual norm: {last.rnorm_recursive:.6e}")
    if last.rnorm_true is not None:
        print(f"true residual norm:      {last.rnorm_true:.6e}")
    if result.replacements:
        print(f"replacements at iterations: {result.replacements}")
    if args.history:
        print(f"history written to {args.history}")
    return 0


def _cmd_analyze_shift(args) -> int:
    if args.sigma_grid:
        grid = parse_sigma_grid(args.sigma_grid)
    elif args.matrix:
        grid = default_sigma_grid(load_matrix(args.matrix))
    else:
        print("error: provide --sigma-grid or --matrix for a default grid",
              file=sys.stderr)
        return 2
    sweep = run_analyze_shift(args.history, args.iter, grid, output=args.output)
    k0 = int(np.argmin(np.abs(sweep.grid)))
    print(f"iteration used: {sweep.iter}")
    print(f"psi at sigma={sweep.grid[k0]:g}: {sweep.psi_values[k0]:.6e}")
    print(f"argmin sigma*: {sweep.argmin:g} "
          f"(psi {sweep.psi_values.min():.6e})")
    if args.output:
        print(f"sweep written to {args.output}")
    return 0


def _cmd_fetch(args) -> int:
    path = fetch_matrix(args.name, cache_dir=args.cache_dir, base_url=args.base_url)
    print(path)
    return 0


def _cmd_gen(args) -> int:
    A = load_matrix(args.matrix, seed=args.seed)
    write_matrix_market(A, args.out)
    print(f"wrote {args.out} (n={A.n}, nnz={A.nnz})")
    return 0


def _cmd_bench(args) -> int:
    names = set(args.rows.split(",")) if args.rows else None
    descriptors = [d for d in REFERENCE_BENCHMARKS
                   if names is None or d.name in names]
    rows = run_benchmark_suite(descriptors, cache_dir=args.cache_dir,
                               base_url=args.base_url)
    for row in rows:
        print(f"{row.name:12s} {row.status.upper():5s} {row.detail}")
    return 1 if any(r.status == "fail" for r in rows) else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kpl",
        description="CG variants for sparse SPD systems with rounding-error "
                    "diagnostics and shift selection.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run one solver and emit its history")
    _add_solve_args(p_solve)
    p_solve.set_defaults(func=_cmd_solve)

    p_an = sub.add_parser("analyze-shift",
                          help="sweep the amplification factor over shifts")
    p_an.add_argument("--history", required=True, metavar="PATH")
    p_an.add_argument("--iter", type=int, required=True)
    p_an.add_argument("--sigma-grid", metavar="LO:STEP:HI")
    p_an.add_argument("--matrix", help="matrix source for a default grid")
    p_an.add_argument("--output", metavar="PATH", help="write sigma,psi CSV here")
    p_an.set_defaults(func=_cmd_analyze_shift)

    p_fetch = sub.add_parser("fetch", help="download and cache a matrix")
    p_fetch.add_argument("--name", required=True)
    p_fetch.add_argument("--cache-dir")
    p_fetch.add_argument("--base-url")
    p_fetch.set_defaults(func=_cmd_fetch)

    p_gen = sub.add_parser("gen", help="generate a matrix and write Matrix Market")
    p_gen.add_argument("--matrix", required=True)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.set_defaults(func=_cmd_gen)

    p_bench = sub.add_parser("bench", help="run the reference benchmark rows")
    p_bench.add_argument("--rows", help="comma-separated subset of row names")
    p_bench.add_argument("--cache-dir")
    p_bench.add_argument("--base-url")
    p_bench.set_defaults(func=_cmd_bench)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
