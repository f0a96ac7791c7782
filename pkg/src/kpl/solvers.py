"""Conjugate gradient variants for sparse SPD systems, with instrumentation.

Five solvers share one record format:

* ``solve_cg``: classic preconditioned CG (one spmv and one preconditioner
  application per iteration).
* ``solve_pcg``: pipelined CG, which replaces the explicit products by
  recursively updated auxiliary vectors so the global reductions could be
  overlapped with the matrix-vector product.
* ``solve_pcg_shifted``: pipelined CG whose auxiliary recurrences are built
  against (A M^{-1} - shift I); a well chosen shift damps the amplification
  of local rounding errors and restores CG-level attainable accuracy.
* ``solve_pcg_var_shifted``: the same with an iteration-dependent shift
  schedule and correction terms for the shift differences.
* ``solve_pcg_rr``: pipelined CG with automated residual replacement, i.e.
  periodic explicit recomputation of the residual and auxiliary vectors.

All variants coincide in exact arithmetic.  In floating point they differ in
how local rounding errors propagate; with ``track_gaps`` enabled each record
carries the norms of the gaps between the recursively updated vectors and
their explicitly recomputed counterparts (gap_f for the residual, gap_g /
gap_h / gap_j for the auxiliary vectors), alongside the true residual norm.

Determinism: every reduction has a pinned summation order (see
:mod:`kpl.sparse`), and a zero coefficient short-circuits to an exact copy,
so the shifted variant with shift 0, the variable-shift variant with a
constant schedule, and the replacement variant with threshold 0 reproduce
their parent algorithm bit-for-bit, records included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .precond import Preconditioner, identity
from .sparse import SparseMatrix, axpy, dot, norm2, spmv

# unit roundoff of binary64 round-to-nearest
UNIT_ROUNDOFF = float(np.finfo(np.float64).eps) / 2.0

# default residual-replacement threshold: replace while the estimated gap
# stays a sqrt(eps) factor below the recursive residual norm
DEFAULT_RR_THRESHOLD = math.sqrt(UNIT_ROUNDOFF)

_METHODS = ("cg", "pcg", "pcg_sh", "pcg_var_sh", "pcg_rr")


class BreakdownError(ArithmeticError):
    """A denominator that must be positive for SPD inputs was not."""

    def __init__(self, iteration, what):
        self.iteration = iteration
        self.what = what
        super().__init__(f"breakdown at iteration {iteration}: {what}")


@dataclass(frozen=True)
class SolverConfig:
    method: str = "cg"
    shift: float = 0.0
    shift_schedule: tuple[float, ...] | None = None
    max_iters: int = 100
    rtol: float = 0.0
    track_gaps: bool = False
    rr_threshold: float = DEFAULT_RR_THRESHOLD

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rtol < 0.0:
            raise ValueError("rtol must be >= 0")
        if not math.isfinite(self.shift):
            raise ValueError("shift must be finite")
        if self.method == "pcg_var_sh":
            if self.shift_schedule is None:
                raise ValueError("pcg_var_sh requires a shift schedule")
            if len(self.shift_schedule) < self.max_iters + 1:
                raise ValueError(
                    "shift schedule must provide max_iters + 1 values "
                    "(the entry before iteration 0, then one per iteration)"
                )


@dataclass(slots=True)
class IterationRecord:
    iter: int
    alpha: float
    beta: float
    gamma: float
    delta: float
    rnorm_recursive: float
    rnorm_true: float | None = None
    gap_f: float | None = None
    gap_g: float | None = None
    gap_h: float | None = None
    gap_j: float | None = None


@dataclass(slots=True)
class SolveResult:
    x: np.ndarray
    converged: bool
    iterations: int
    history: list[IterationRecord]
    replacements: list[int] = field(default_factory=list)


@dataclass(slots=True)
class SolverState:
    """Per-iteration snapshot handed to callbacks at every record point.

    For the pipelined variants the auxiliary fields hold the vectors from the
    *previous* pass (the ones that live alongside x, r, u, w in the gap state
    at this iteration index); classic CG carries its current direction in
    ``p_prev`` / ``s_prev``.  Vectors are not copies; consumers must copy
    anything they keep.
    """

    iter: int
    x: np.ndarray
    r: np.ndarray
    u: np.ndarray
    alpha: float
    beta: float
    gamma: float
    delta: float
    w: np.ndarray | None = None
    s_prev: np.ndarray | None = None
    t_prev: np.ndarray | None = None
    p_prev: np.ndarray | None = None
    q_prev: np.ndarray | None = None
    z_prev: np.ndarray | None = None
    sigma_prev: float = 0.0
    sigma: float | None = None


def gap_vectors(A: SparseMatrix, b: np.ndarray, state: SolverState):
    """Explicit-minus-recursive gap vectors at one record point.

    Returns ``(true_residual, f, g, h, j)``; the auxiliary gaps are None for
    classic CG states (no recursively maintained w/s/z).
    """
    true_r = b - spmv(A, state.x)
    f = true_r - state.r
    if state.w is None:
        return true_r, f, None, None, None
    h = axpy(-state.sigma_prev, state.r, spmv(A, state.u)) - state.w
    g = axpy(-state.sigma_prev, state.t_prev, spmv(A, state.p_prev)) - state.s_prev
    j = spmv(A, state.q_prev) - state.z_prev
    return true_r, f, g, h, j


def measure_gaps(A: SparseMatrix, b: np.ndarray, state: SolverState):
    """Norms of the residual/auxiliary gaps: (rnorm_true, |f|, |g|, |h|, |j|)."""
    true_r, f, g, h, j = gap_vectors(A, b, state)
    return (
        norm2(true_r),
        norm2(f),
        None if g is None else norm2(g),
        None if h is None else norm2(h),
        None if j is None else norm2(j),
    )


def _sub2(base, a, xv, c, yv):
    """base - (a*xv + c*yv) with the second and third term summed first.

    A zero second coefficient reduces to the plain two-term update so the
    degenerate variant stays bit-identical to its parent.
    """
    if c == 0.0:
        return base - a * xv
    return base - (a * xv + c * yv)


def _check_system(A, b, x0):
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (A.n,):
        raise ValueError("right-hand side dimension mismatch")
    if x0 is None:
        x0 = np.zeros(A.n)
    else:
        x0 = np.asarray(x0, dtype=np.float64)
        if x0.shape != (A.n,):
            raise ValueError("initial guess dimension mismatch")
    return b, x0


def _pipelined_scalars(i, gamma, delta, gamma_prev, alpha_prev, last):
    """beta_i, alpha_i of the pipelined recurrences, guarded on the final record.

    At iteration 0 both gamma and delta are explicit quadratic forms and a
    nonpositive value is a genuine SPD violation.  Later iterations compute
    them from recursively maintained vectors, which near the attainable-
    accuracy plateau are dominated by their own rounding-error gaps; signs
    can then flip transiently without the run being wrong, so only exact
    zeros and non-finite values abort.
    """
    if i == 0:
        beta = 0.0
        if delta > 0.0:
            alpha = gamma / delta
        elif last:
            alpha = 0.0
        elif gamma <= 0.0:
            raise BreakdownError(i, "nonpositive (r, u)")
        else:
            raise BreakdownError(i, "nonpositive curvature (w, u)")
        return beta, alpha
    beta = gamma / gamma_prev if gamma_prev != 0.0 else 0.0
    if last:
        if gamma == 0.0 or delta == 0.0:
            return beta, 0.0
        denom = delta / gamma - beta / alpha_prev
        alpha = 1.0 / denom if denom != 0.0 else 0.0
        return beta, (alpha if math.isfinite(alpha) else 0.0)
    if gamma == 0.0:
        raise BreakdownError(i, "vanishing (r, u)")
    denom = delta / gamma - beta / alpha_prev
    if denom == 0.0:
        raise BreakdownError(i, "vanishing alpha denominator")
    alpha = 1.0 / denom
    if not (math.isfinite(alpha) and math.isfinite(beta)):
        raise BreakdownError(i, "non-finite coefficients")
    return beta, alpha


def _rnorm_true_wanted(cfg, i, last):
    return cfg.track_gaps or last or (i % 10 == 0)


def solve_cg(A: SparseMatrix, M: Preconditioner | None, b, x0, cfg: SolverConfig,
             callback=None) -> SolveResult:
    """Classic preconditioned CG.

    One spmv (s = A p) and one preconditioner application per iteration; the
    residual is updated recursively, so only the gap_f diagnostic applies.
    Raises :class:`BreakdownError` when (r, u) or (s, p) is nonpositive
    before convergence.
    """
    M = M if M is not None else identity()
    b, x0 = _check_system(A, b, x0)
    bnorm = norm2(b)
    x = x0.copy()
    r = b - spmv(A, x)
    u = M.apply(r)
    p = np.zeros(A.n)
    gamma_prev = 0.0
    history: list[IterationRecord] = []
    converged = False
    i = 0
    for i in range(cfg.max_iters + 1):
        gamma = dot(r, u)
        rnorm = norm2(r)
        converged = rnorm == 0.0 or (cfg.rtol > 0.0 and rnorm <= cfg.rtol * bnorm)
        last = converged or i == cfg.max_iters
        if i == 0:
            beta = 0.0
        else:
            beta = gamma / gamma_prev if gamma_prev > 0.0 else 0.0
        if not last:
            if gamma <= 0.0:
                raise BreakdownError(i, "nonpositive (r, u)")
        p = axpy(beta, p, u)
        s = spmv(A, p)
        delta = dot(s, p)
        if last:
            alpha = gamma / delta if delta > 0.0 else 0.0
        elif delta <= 0.0:
            raise BreakdownError(i, "nonpositive curvature (s, p)")
        else:
            alpha = gamma / delta
        state = SolverState(i, x, r, u, alpha, beta, gamma, delta,
                            p_prev=p, s_prev=s)
        rec = IterationRecord(i, alpha, beta, gamma, delta, rnorm)
        if cfg.track_gaps:
            rec.rnorm_true, rec.gap_f, _, _, _ = measure_gaps(A, b, state)
        elif _rnorm_true_wanted(cfg, i, last):
            rec.rnorm_true = norm2(b - spmv(A, x))
        history.append(rec)
        if callback is not None:
            callback(state)
        if last:
            break
        x = axpy(alpha, p, x)
        r = r - alpha * s
        u = M.apply(r)
        gamma_prev = gamma
    return SolveResult(x, converged, i, history)


def solve_pcg(A: SparseMatrix, M: Preconditioner | None, b, x0, cfg: SolverConfig,
              callback=None) -> SolveResult:
    """Pipelined preconditioned CG.

    All auxiliary vectors (s, t, p, q, z and the preconditioned residual u)
    are maintained by recurrences; the only explicit operator applications
    per iteration are m = M^{-1} w and n = A m, which is what lets the
    reduction for gamma/delta overlap the spmv in a distributed setting.
    """
    M = M if M is not None else identity()
    b, x0 = _check_system(A, b, x0)
    bnorm = norm2(b)
    x = x0.copy()
    r = b - spmv(A, x)
    u = M.apply(r)
    w = spmv(A, u)
    z = np.zeros(A.n)
    q = np.zeros(A.n)
    s = np.zeros(A.n)
    t = np.zeros(A.n)
    p = np.zeros(A.n)
    gamma_prev = 0.0
    alpha_prev = 1.0
    history: list[IterationRecord] = []
    converged = False
    i = 0
    for i in range(cfg.max_iters + 1):
        gamma = dot(r, u)
        delta = dot(w, u)
        rnorm = norm2(r)
        converged = rnorm == 0.0 or (cfg.rtol > 0.0 and rnorm <= cfg.rtol * bnorm)
        last = converged or i == cfg.max_iters
        beta, alpha = _pipelined_scalars(i, gamma, delta, gamma_prev, alpha_prev, last)
        state = SolverState(i, x, r, u, alpha, beta, gamma, delta, w=w,
                            s_prev=s, t_prev=t, p_prev=p, q_prev=q, z_prev=z,
                            sigma_prev=0.0, sigma=0.0)
        rec = IterationRecord(i, alpha, beta, gamma, delta, rnorm)
        if cfg.track_gaps:
            (rec.rnorm_true, rec.gap_f, rec.gap_g, rec.gap_h,
             rec.gap_j) = measure_gaps(A, b, state)
        elif _rnorm_true_wanted(cfg, i, last):
            rec.rnorm_true = norm2(b - spmv(A, x))
        history.append(rec)
        if callback is not None:
            callback(state)
        if last:
            break
        m = M.apply(w)
        n = spmv(A, m)
        z = axpy(beta, z, n)
        q = axpy(beta, q, m)
        s = axpy(beta, s, w)
        t = axpy(beta, t, r)
        p = axpy(beta, p, u)
        x = axpy(alpha, p, x)
        r = r - alpha * s
        u = u - alpha * q
        w = w - alpha * z
        gamma_prev = gamma
        alpha_prev = alpha
    return SolveResult(x, converged, i, history)


def solve_pcg_shifted(A: SparseMatrix, M: Preconditioner | None, b, x0,
                      cfg: SolverConfig, callback=None) -> SolveResult:
    """Pipelined CG with a fixed shift in the auxiliary recurrences.

    w and s are maintained against (A M^{-1} - shift I); the residual and
    preconditioned-residual updates gain a compensating third term, evaluated
    with the second and third terms summed first.  With shift = 0 this is
    bit-identical to :func:`solve_pcg`.
    """
    sigma = float(cfg.shift)
    M = M if M is not None else identity()
    b, x0 = _check_system(A, b, x0)
    bnorm = norm2(b)
    x = x0.copy()
    r = b - spmv(A, x)
    u = M.apply(r)
    w = axpy(-sigma, r, spmv(A, u))
    z = np.zeros(A.n)
    q = np.zeros(A.n)
    s = np.zeros(A.n)
    t = np.zeros(A.n)
    p = np.zeros(A.n)
    gamma_prev = 0.0
    alpha_prev = 1.0
    history: list[IterationRecord] = []
    converged = False
    i = 0
    for i in range(cfg.max_iters + 1):
        gamma = dot(r, u)
        delta = dot(axpy(sigma, r, w), u)
        rnorm = norm2(r)
        converged = rnorm == 0.0 or (cfg.rtol > 0.0 and rnorm <= cfg.rtol * bnorm)
        last = converged or i == cfg.max_iters
        beta, alpha = _pipelined_scalars(i, gamma, delta, gamma_prev, alpha_prev, last)
        state = SolverState(i, x, r, u, alpha, beta, gamma, delta, w=w,
                            s_prev=s, t_prev=t, p_prev=p, q_prev=q, z_prev=z,
                            sigma_prev=sigma, sigma=sigma)
        rec = IterationRecord(i, alpha, beta, gamma, delta, rnorm)
        if cfg.track_gaps:
            (rec.rnorm_true, rec.gap_f, rec.gap_g, rec.gap_h,
             rec.gap_j) = measure_gaps(A, b, state)
        elif _rnorm_true_wanted(cfg, i, last):
            rec.rnorm_true = norm2(b - spmv(A, x))
        history.append(rec)
        if callback is not None:
            callback(state)
        if last:
            break
        m = M.apply(w)
        n = spmv(A, m)
        z = axpy(beta, z, n)
        q = axpy(beta, q, m)
        s = axpy(beta, s, w)
        t = axpy(beta, t, r)
        p = axpy(beta, p, u)
        x = axpy(alpha, p, x)
        asig = alpha * sigma
        r = _sub2(r, alpha, s, asig, t)
        u = _sub2(u, alpha, q, asig, p)
        w = w - alpha * z
        gamma_prev = gamma
        alpha_prev = alpha
    return SolveResult(x, converged, i, history)


def solve_pcg_var_shifted(A: SparseMatrix, M: Preconditioner | None, b, x0,
                          cfg: SolverConfig, callback=None) -> SolveResult:
    """Pipelined CG with an iteration-dependent shift schedule.

    ``cfg.shift_schedule`` supplies the shift used before iteration 0
    followed by one value per iteration.  Differences between consecutive
    shifts enter as correction terms in the s, q, z and w recurrences, which
    fixes their evaluation order: t and p first, then s, q, z, and w before
    the residual it reads.  A constant schedule is bit-identical to
    :func:`solve_pcg_shifted` with that shift.
    """
    M = M if M is not None else identity()
    b, x0 = _check_system(A, b, x0)
    sched = np.asarray(cfg.shift_schedule, dtype=np.float64)
    if sched.ndim != 1 or len(sched) < cfg.max_iters + 1:
        raise ValueError("shift schedule must provide max_iters + 1 values")
    bnorm = norm2(b)
    x = x0.copy()
    r = b - spmv(A, x)
    u = M.apply(r)
    w = axpy(-sched[0], r, spmv(A, u))
    z = np.zeros(A.n)
    q = np.zeros(A.n)
    s = np.zeros(A.n)
    t = np.zeros(A.n)
    p = np.zeros(A.n)
    gamma_prev = 0.0
    alpha_prev = 1.0
    history: list[IterationRecord] = []
    converged = False
    i = 0
    for i in range(cfg.max_iters + 1):
        sigma_prev = float(sched[i])
        sigma_cur = float(sched[i + 1]) if i + 1 < len(sched) else None
        gamma = dot(r, u)
        delta = dot(axpy(sigma_prev, r, w), u)
        rnorm = norm2(r)
        converged = rnorm == 0.0 or (cfg.rtol > 0.0 and rnorm <= cfg.rtol * bnorm)
        last = converged or i == cfg.max_iters
        beta, alpha = _pipelined_scalars(i, gamma, delta, gamma_prev, alpha_prev, last)
        state = SolverState(i, x, r, u, alpha, beta, gamma, delta, w=w,
                            s_prev=s, t_prev=t, p_prev=p, q_prev=q, z_prev=z,
                            sigma_prev=sigma_prev, sigma=sigma_cur)
        rec = IterationRecord(i, alpha, beta, gamma, delta, rnorm)
        if cfg.track_gaps:
            (rec.rnorm_true, rec.gap_f, rec.gap_g, rec.gap_h,
             rec.gap_j) = measure_gaps(A, b, state)
        elif _rnorm_true_wanted(cfg, i, last):
            rec.rnorm_true = norm2(b - spmv(A, x))
        history.append(rec)
        if callback is not None:
            callback(state)
        if last:
            break
        m = M.apply(w)
        n = spmv(A, m)
        dsig = sigma_cur - sigma_prev
        t = axpy(beta, t, r)
        p = axpy(beta, p, u)
        s = axpy(-dsig, t, axpy(beta, s, w))
        q = axpy(-dsig, p, axpy(beta, q, m))
        zbase = axpy(beta, z, n)
        if dsig == 0.0:
            z = zbase
        else:
            z = axpy(-dsig, axpy(sigma_cur, t, s), zbase)
        x = axpy(alpha, p, x)
        w = _sub2(w, alpha, z, dsig, r)
        asig = alpha * sigma_cur
        r = _sub2(r, alpha, s, asig, t)
        u = _sub2(u, alpha, q, asig, p)
        gamma_prev = gamma
        alpha_prev = alpha
    return SolveResult(x, converged, i, history)


class _ReplacementTrigger:
    """Running residual-gap estimate driving automated replacements.

    Accumulates the standard per-iteration bound on the residual rounding
    error, e += eps * ((mu sqrt(n) + 1) |A| |x| + |r|), and requests a
    replacement when the estimate first exceeds ``tau * |r|`` after having
    been below it (a crossing test); the estimate restarts from the cost of
    one explicit recomputation.
    """

    def __init__(self, A: SparseMatrix, bnorm: float, tau: float):
        self.tau = tau
        self.eps = UNIT_ROUNDOFF
        self.coef = (A.mu * math.sqrt(A.n) + 1.0) * A.norm_inf()
        self.e = 0.0
        self.held = False
        self.bnorm = bnorm

    def start(self, xnorm, rnorm):
        self.e = self.eps * (self.coef * xnorm + self.bnorm)
        self.held = self.e <= self.tau * rnorm

    def update(self, xnorm, rnorm) -> bool:
        self.e += self.eps * (self.coef * xnorm + rnorm)
        ok = self.e <= self.tau * rnorm
        fire = self.held and not ok and self.tau > 0.0
        self.held = ok
        return fire

    def reset(self, xnorm, rnorm):
        self.e = self.eps * (self.coef * xnorm + rnorm)
        self.held = self.e <= self.tau * rnorm


def solve_pcg_rr(A: SparseMatrix, M: Preconditioner | None, b, x0,
                 cfg: SolverConfig, callback=None) -> SolveResult:
    """Pipelined CG with automated residual replacement.

    Runs the unshifted pipelined recurrences; when the replacement trigger
    fires, the residual and auxiliary vectors are recomputed explicitly
    (r = b - A x, u = M^{-1} r, w = A u, s = A p, q = M^{-1} s, z = A q) and
    the iteration index is recorded.  With ``rr_threshold`` 0 no replacement
    ever fires and the run is bit-identical to :func:`solve_pcg`.
    """
    M = M if M is not None else identity()
    b, x0 = _check_system(A, b, x0)
    bnorm = norm2(b)
    trigger = _ReplacementTrigger(A, bnorm, cfg.rr_threshold)
    x = x0.copy()
    r = b - spmv(A, x)
    u = M.apply(r)
    w = spmv(A, u)
    z = np.zeros(A.n)
    q = np.zeros(A.n)
    s = np.zeros(A.n)
    t = np.zeros(A.n)
    p = np.zeros(A.n)
    trigger.start(norm2(x), norm2(r))
    gamma_prev = 0.0
    alpha_prev = 1.0
    history: list[IterationRecord] = []
    replacements: list[int] = []
    converged = False
    i = 0
    for i in range(cfg.max_iters + 1):
        gamma = dot(r, u)
        delta = dot(w, u)
        rnorm = norm2(r)
        converged = rnorm == 0.0 or (cfg.rtol > 0.0 and rnorm <= cfg.rtol * bnorm)
        last = converged or i == cfg.max_iters
        beta, alpha = _pipelined_scalars(i, gamma, delta, gamma_prev, alpha_prev, last)
        state = SolverState(i, x, r, u, alpha, beta, gamma, delta, w=w,
                            s_prev=s, t_prev=t, p_prev=p, q_prev=q, z_prev=z,
                            sigma_prev=0.0, sigma=0.0)
        rec = IterationRecord(i, alpha, beta, gamma, delta, rnorm)
        if cfg.track_gaps:
            (rec.rnorm_true, rec.gap_f, rec.gap_g, rec.gap_h,
             rec.gap_j) = measure_gaps(A, b, state)
        elif _rnorm_true_wanted(cfg, i, last):
            rec.rnorm_true = norm2(b - spmv(A, x))
        history.append(rec)
        if callback is not None:
            callback(state)
        if last:
            break
        m = M.apply(w)
        n = spmv(A, m)
        z = axpy(beta, z, n)
        q = axpy(beta, q, m)
        s = axpy(beta, s, w)
        t = axpy(beta, t, r)
        p = axpy(beta, p, u)
        x = axpy(alpha, p, x)
        r = r - alpha * s
        u = u - alpha * q
        w = w - alpha * z
        gamma_prev = gamma
        alpha_prev = alpha
        if trigger.update(norm2(x), norm2(r)):
            r = b - spmv(A, x)
            u = M.apply(r)
            w = spmv(A, u)
            s = spmv(A, p)
            q = M.apply(s)
            z = spmv(A, q)
            replacements.append(i + 1)
            trigger.reset(norm2(x), norm2(r))
    return SolveResult(x, converged, i, history, replacements)


_SOLVERS = {
    "cg": solve_cg,
    "pcg": solve_pcg,
    "pcg_sh": solve_pcg_shifted,
    "pcg_var_sh": solve_pcg_var_shifted,
    "pcg_rr": solve_pcg_rr,
}


def solve(A: SparseMatrix, M: Preconditioner | None, b, x0, cfg: SolverConfig,
          callback=None) -> SolveResult:
    """Dispatch on ``cfg.method``."""
    return _SOLVERS[cfg.method](A, M, b, x0, cfg, callback=callback)
