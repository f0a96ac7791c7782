"""Run orchestration: problem setup, history files, fetching, benchmark suite.

A :class:`RunConfig` names a matrix (file or generator), a right-hand side
convention, a preconditioner and a solver configuration; :func:`run_solve`
executes it and emits the iteration history as CSV or JSON.  The benchmark
suite replays reference problems with fixed iteration budgets and compares
final true residuals against expected levels with order-of-magnitude
tolerance, skipping rows whose matrices cannot be fetched.
"""

from __future__ import annotations

import gzip
import io
import json
import os
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mmio import read_matrix_market
from .precond import Preconditioner, identity, make_ic0, make_jacobi
from .solvers import IterationRecord, SolveResult, SolverConfig, solve
from .sparse import SparseMatrix, laplacian_2d, random_spd, spmv
from .stability import CoefficientHistory, ShiftSweep, select_shift

HISTORY_COLUMNS = ("iter", "alpha", "beta", "gamma", "delta",
                   "rnorm_recursive", "rnorm_true",
                   "gap_f", "gap_g", "gap_h", "gap_j")

CACHE_ENV_VAR = "KPL_CACHE_DIR"
BASE_URL_ENV_VAR = "KPL_BASE_URL"
DEFAULT_BASE_URL = "https://math.nist.gov/pub/MatrixMarket2"


@dataclass(frozen=True)
class RunConfig:
    """One solve: matrix source, right-hand side convention, preconditioner, solver.

    ``matrix_source`` is a Matrix Market path, ``lapl:<nx>x<ny>`` for the
    generated 5-point Laplacian, or ``rand:<n>[:<cond>]`` for a seeded random
    SPD test problem.  ``rhs_mode`` is ``ones_solution`` (b = A xhat with
    xhat_j = 1/sqrt(n), so the intended solution has unit norm) or
    ``ones_rhs`` (b_j = 1/sqrt(n)).
    """

    matrix_source: str
    rhs_mode: str = "ones_solution"
    precond: str = "none"
    ic_eta: float = 0.0
    solver: SolverConfig = field(default_factory=SolverConfig)
    output_format: str = "csv"
    output_path: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.rhs_mode not in ("ones_solution", "ones_rhs"):
            raise ValueError(f"unknown rhs_mode {self.rhs_mode!r}")
        if self.precond not in ("none", "jacobi", "ic0"):
            raise ValueError(f"unknown preconditioner {self.precond!r}")
        if self.ic_eta < 0.0:
            raise ValueError("ic_eta must be >= 0")
        if self.output_format not in ("csv", "json"):
            raise ValueError(f"unknown output format {self.output_format!r}")


def load_matrix(source: str, seed: int = 0) -> SparseMatrix:
    """Resolve a matrix source string (generator spec or file path)."""
    if source.startswith("lapl:"):
        dims = source[5:].split("x")
        if len(dims) != 2:
            raise ValueError(f"bad Laplacian spec {source!r}, expected lapl:<nx>x<ny>")
        return laplacian_2d(int(dims[0]), int(dims[1]))
    if source.startswith("rand:"):
        parts = source[5:].split(":")
        n = int(parts[0])
        cond = float(parts[1]) if len(parts) > 1 else 100.0
        return random_spd(n, cond=cond, seed=seed)
    return read_matrix_market(source)


def build_rhs(A: SparseMatrix, rhs_mode: str) -> np.ndarray:
    entries = np.full(A.n, 1.0 / np.sqrt(A.n))
    if rhs_mode == "ones_rhs":
        return entries
    return spmv(A, entries)


def build_preconditioner(A: SparseMatrix, kind: str, eta: float = 0.0) -> Preconditioner:
    if kind == "none":
        return identity()
    if kind == "jacobi":
        return make_jacobi(A)
    return make_ic0(A, eta)


def _fmt(value) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.17g" % value


def emit_history(records, fmt: str, sink) -> None:
    """Write iteration records as CSV (fixed column set) or JSON.

    Reals carry 17 significant digits so parsing the file recovers them
    bitwise; untracked fields become empty CSV cells / JSON nulls.
    """
    if not records:
        raise ValueError("no records to emit")
    own = isinstance(sink, (str, os.PathLike))
    fh = open(sink, "w", encoding="ascii", newline="") if own else sink
    try:
        if fmt == "csv":
            fh.write(",".join(HISTORY_COLUMNS) + "\n")
            for rec in records:
                fh.write(",".join(_fmt(getattr(rec, c)) for c in HISTORY_COLUMNS) + "\n")
        elif fmt == "json":
            payload = [{c: getattr(rec, c) for c in HISTORY_COLUMNS} for rec in records]
            json.dump(payload, fh, indent=1)
            fh.write("\n")
        else:
            raise ValueError(f"unknown history format {fmt!r}")
    finally:
        if own:
            fh.close()


def load_history(source) -> list[IterationRecord]:
    """Parse a history file produced by :func:`emit_history` (CSV or JSON)."""
    if isinstance(source, (str, os.PathLike)):
        text = Path(source).read_text(encoding="ascii")
    else:
        text = source.read()
    text = text.lstrip()
    records = []
    if text.startswith("["):
        for row in json.loads(text):
            records.append(IterationRecord(**{c: row.get(c) for c in HISTORY_COLUMNS}))
        return records
    lines = text.splitlines()
    header = lines[0].split(",")
    if tuple(header) != HISTORY_COLUMNS:
        raise ValueError(f"unexpected history header: {lines[0]!r}")
    for line in lines[1:]:
        if not line.strip():
            continue
        cells = line.split(",")
        row = {}
        for c, cell in zip(HISTORY_COLUMNS, cells):
            if cell == "":
                row[c] = None
            elif c == "iter":
                row[c] = int(cell)
            else:
                row[c] = float(cell)
        records.append(IterationRecord(**row))
    return records


def run_solve(cfg: RunConfig, callback=None):
    """Execute one configured solve and emit its history if a path is set.

    Returns ``(result, matrix, preconditioner, rhs)`` so callers can keep
    analyzing the same problem.
    """
    A = load_matrix(cfg.matrix_source, seed=cfg.seed)
    b = build_rhs(A, cfg.rhs_mode)
    M = build_preconditioner(A, cfg.precond, cfg.ic_eta)
    result = solve(A, M, b, None, cfg.solver, callback=callback)
    if cfg.output_path is not None:
        emit_history(result.history, cfg.output_format, cfg.output_path)
    return result, A, M, b


def parse_sigma_grid(spec: str) -> np.ndarray:
    """Parse an inclusive ``lo:step:hi`` grid specification."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"bad grid spec {spec!r}, expected lo:step:hi")
    lo, step, hi = (float(p) for p in parts)
    if step <= 0 or hi < lo:
        raise ValueError(f"bad grid spec {spec!r}")
    npts = int(round((hi - lo) / step)) + 1
    return lo + step * np.arange(npts)


def run_analyze_shift(history_source, iteration: int, grid, output=None) -> ShiftSweep:
    """Sweep the amplification factor over a shift grid from a stored history.

    The coefficient history is truncated to what the file provides when it is
    shorter than the requested iteration; the sweep records the iteration
    actually used.  Writes a ``sigma,psi`` CSV when ``output`` is given.
    """
    records = load_history(history_source)
    hist = CoefficientHistory(
        np.array([r.alpha for r in records if r.iter >= 1]),
        np.array([r.beta for r in records if r.iter >= 1]),
    )
    if len(hist) == 0:
        raise ValueError("history too short: no usable coefficient records")
    if isinstance(grid, str):
        grid = parse_sigma_grid(grid)
    used = min(iteration, len(hist))
    sweep = select_shift(hist, used, grid)
    if output is not None:
        own = isinstance(output, (str, os.PathLike))
        fh = open(output, "w", encoding="ascii", newline="") if own else output
        try:
            fh.write("sigma,psi\n")
            for s, v in zip(sweep.grid, sweep.psi_values):
                fh.write("%.17g,%.17g\n" % (s, v))
        finally:
            if own:
                fh.close()
    return sweep


def _default_transport(url: str) -> bytes:
    with urllib.request.urlopen(url, timeout=60) as resp:
        return resp.read()


def fetch_matrix(name: str, cache_dir=None, base_url=None, transport=None) -> Path:
    """Download ``<base_url>/<name>.mtx.gz``, validate, cache, return the path.

    A cached copy short-circuits the network entirely.  The decompressed file
    is parsed before it is committed to the cache, so a corrupt download
    never lands there.  ``transport`` maps a URL to response bytes and exists
    for testing and mirror quirks.
    """
    if cache_dir is None:
        cache_dir = os.environ.get(CACHE_ENV_VAR) or Path.home() / ".cache" / "kpl"
    cache_dir = Path(cache_dir)
    target = cache_dir / (name.replace("/", "_") + ".mtx")
    if target.exists():
        return target
    if base_url is None:
        base_url = os.environ.get(BASE_URL_ENV_VAR, DEFAULT_BASE_URL)
    if transport is None:
        transport = _default_transport
    url = f"{base_url.rstrip('/')}/{name}.mtx.gz"
    raw = transport(url)
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    read_matrix_market(io.BytesIO(raw))
    cache_dir.mkdir(parents=True, exist_ok=True)
    tmp = target.with_suffix(".tmp")
    tmp.write_bytes(raw)
    tmp.replace(target)
    return target


@dataclass(frozen=True)
class BenchmarkDescriptor:
    """Reference problem with expected final true-residual levels.

    ``expected_pcg`` is a stagnation level and is checked as a two-sided
    bracket; the CG and shifted expectations are attainment levels checked
    as upper bounds, both with a factor-10 tolerance.
    """

    name: str
    source: str
    n: int
    precond: str
    ic_eta: float
    iters: int
    sigma_star: float
    rhs_mode: str
    expected_cg: float
    expected_pcg: float
    expected_pcg_sh: float
    remote: bool = True


REFERENCE_BENCHMARKS = (
    BenchmarkDescriptor("lapl200", "lapl:200x200", 40000, "none", 0.0, 500, 4.00,
                        "ones_rhs", 6.8e-12, 3.1e-07, 6.8e-12, remote=False),
    BenchmarkDescriptor("bcsstk15", "harwell-boeing/bcsstruc2/bcsstk15", 3948,
                        "jacobi", 0.0, 800, 2.00,
                        "ones_solution", 1.7e-06, 1.2e-02, 1.9e-06),
    BenchmarkDescriptor("nos1", "harwell-boeing/lanpro/nos1", 237,
                        "ic0", 0.5, 400, 0.82,
                        "ones_solution", 9.8e-07, 1.5e-02, 3.2e-06),
    BenchmarkDescriptor("s1rmt3m1", "misc/cylshell/s1rmt3m1", 5489,
                        "ic0", 0.0, 300, 1.00,
                        "ones_solution", 1.4e-10, 4.4e-07, 1.4e-10),
)


@dataclass
class BenchmarkRow:
    name: str
    status: str                  # "pass" | "fail" | "skip"
    detail: str
    finals: dict = field(default_factory=dict)


def _final_true_norm(result: SolveResult) -> float:
    return result.history[-1].rnorm_true


def run_benchmark_suite(descriptors, cache_dir=None, base_url=None,
                        transport=None, tolerance_factor: float = 10.0):
    """Run CG / pipelined / shifted-pipelined on each descriptor and grade finals.

    Rows whose matrix cannot be fetched are reported as skipped, not failed.
    """
    rows = []
    for d in descriptors:
        try:
            if d.remote:
                path = fetch_matrix(d.source, cache_dir=cache_dir,
                                    base_url=base_url, transport=transport)
                A = read_matrix_market(path)
            else:
                A = load_matrix(d.source)
        except Exception as exc:  # fetch/parse unavailable: skip, don't fail
            rows.append(BenchmarkRow(d.name, "skip", f"matrix unavailable: {exc}"))
            continue
        if A.n != d.n:
            rows.append(BenchmarkRow(
                d.name, "fail", f"dimension mismatch: got {A.n}, expected {d.n}"))
            continue
        b = build_rhs(A, d.rhs_mode)
        M = build_preconditioner(A, d.precond, d.ic_eta)
        finals = {}
        for label, method, shift in (("cg", "cg", 0.0),
                                     ("pcg", "pcg", 0.0),
                                     ("pcg_sh", "pcg_sh", d.sigma_star)):
            cfg = SolverConfig(method=method, shift=shift, max_iters=d.iters, rtol=0.0)
            finals[label] = _final_true_norm(solve(A, M, b, None, cfg))
        checks = [
            ("cg", finals["cg"] <= tolerance_factor * d.expected_cg),
            ("pcg", d.expected_pcg / tolerance_factor <= finals["pcg"]
             <= d.expected_pcg * tolerance_factor),
            ("pcg_sh", finals["pcg_sh"] <= tolerance_factor * d.expected_pcg_sh),
        ]
        bad = [label for label, ok in checks if not ok]
        status = "fail" if bad else "pass"
        detail = ("final residuals out of range: " + ", ".join(bad)) if bad else (
            "finals cg=%.3g pcg=%.3g pcg_sh=%.3g" %
            (finals["cg"], finals["pcg"], finals["pcg_sh"]))
        rows.append(BenchmarkRow(d.name, status, detail, finals))
    return rows
