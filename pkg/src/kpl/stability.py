"""Rounding-error propagation analysis for the pipelined CG recurrences.

The gaps between explicitly computed and recursively updated vectors obey a
coupled linear recurrence: stacking the residual gap f, the direction gap g,
the w-gap h and the z-gap j into a 4-vector, one iteration multiplies the
stack by a 4-by-4 matrix built from that iteration's scalar coefficients
(and the shift) and adds the local rounding errors of the iteration.

Products of these matrices over iteration windows measure how strongly a
local error injected at iteration j has been amplified by iteration i.  The
worst amplification over all windows ending at i, as a function of the
shift, is the quantity a shift sweep minimizes to pick a stabilizing shift
from the coefficient history of an unshifted run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .solvers import UNIT_ROUNDOFF


@dataclass(frozen=True)
class CoefficientHistory:
    """Scalar coefficients alpha_k, beta_k for k = 1 .. len (1-based iterations).

    Entry k - 1 holds the pair used by the iteration-k propagation matrix;
    the iteration-0 coefficients never enter any propagation matrix.
    """

    alphas: np.ndarray
    betas: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alphas", np.asarray(self.alphas, dtype=np.float64))
        object.__setattr__(self, "betas", np.asarray(self.betas, dtype=np.float64))
        if self.alphas.shape != self.betas.shape or self.alphas.ndim != 1:
            raise ValueError("alphas and betas must be 1-D and equally long")
        if not (np.all(np.isfinite(self.alphas)) and np.all(np.isfinite(self.betas))):
            raise ValueError("coefficients must be finite")

    def __len__(self):
        return len(self.alphas)

    @classmethod
    def from_result(cls, result):
        """Extract the history of a solve (records with iteration index >= 1)."""
        recs = [rec for rec in result.history if rec.iter >= 1]
        return cls(
            np.array([rec.alpha for rec in recs]),
            np.array([rec.beta for rec in recs]),
        )


def propagation_matrix(alpha: float, beta: float, sigma: float) -> np.ndarray:
    """One-iteration propagation matrix of the gap stack (f, g, h, j).

    The first column is always e1: the residual gap itself is only carried,
    never amplified directly; amplification enters through the couplings to
    the auxiliary gaps.
    """
    ab = alpha * beta
    return np.array([
        [1.0, -ab, -alpha, 0.0],
        [0.0, beta, 1.0, 0.0],
        [0.0, -ab * sigma, 1.0 - alpha * sigma, -ab],
        [0.0, 0.0, 0.0, beta],
    ])


def propagation_matrix_variable(alpha: float, beta: float,
                                sigma_prev: float, sigma_cur: float) -> np.ndarray:
    """Propagation matrix when the shift changes between iterations.

    Coincides with :func:`propagation_matrix` when the two shifts are equal;
    the shift difference couples the z-gap row to the g and h gaps.
    """
    ab = alpha * beta
    ds = sigma_cur - sigma_prev
    return np.array([
        [1.0, -ab, -alpha, 0.0],
        [0.0, beta, 1.0, 0.0],
        [0.0, -ab * sigma_prev, 1.0 - alpha * sigma_prev, -ab],
        [0.0, -beta * ds, -ds, beta],
    ])


def propagation_product(hist: CoefficientHistory, j: int, i: int,
                        sigma: float) -> np.ndarray:
    """Window product P_i P_{i-1} ... P_j; the identity when j > i."""
    if not 1 <= i <= len(hist):
        raise IndexError(f"iteration index i={i} outside history of length {len(hist)}")
    if j < 1:
        raise IndexError(f"window start j={j} must be >= 1")
    out = np.eye(4)
    for k in range(j, i + 1):
        out = propagation_matrix(hist.alphas[k - 1], hist.betas[k - 1], sigma) @ out
    return out


def _jacobi_max_eigenvalue(S: np.ndarray, tol: float) -> float:
    """Largest eigenvalue of a symmetric 4x4 by cyclic Jacobi rotations."""
    a = S.copy()
    n = a.shape[0]
    for _ in range(60):
        off = 0.0
        total = 0.0
        for p in range(n):
            for q in range(n):
                total += a[p, q] * a[p, q]
                if p != q:
                    off += a[p, q] * a[p, q]
        if off <= tol * tol * total or total == 0.0:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(tau) > 1e150:
                    t = 1.0 / (2.0 * tau)
                else:
                    t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau))
                    if tau == 0.0:
                        t = 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
    return float(np.max(np.diag(a)))


def matrix_2norm(P: np.ndarray, tol: float = 1e-14) -> float:
    """Largest singular value via Jacobi eigen-iteration on P^T P.

    Entries that have overflowed make the result +inf rather than an error:
    a diverged product is a meaningful answer for an amplification sweep.
    """
    P = np.asarray(P, dtype=np.float64)
    if not np.all(np.isfinite(P)):
        return float("inf")
    with np.errstate(over="ignore"):
        S = P.T @ P
    if not np.all(np.isfinite(S)):
        return float("inf")
    lam = _jacobi_max_eigenvalue(S, tol)
    return float(np.sqrt(lam)) if lam > 0.0 else 0.0


def amplification_factor(hist: CoefficientHistory, i: int, shift: float) -> float:
    """Worst 2-norm over all window products ending at iteration i.

    The running product is accumulated right-to-left so every window costs a
    single extra 4x4 multiplication.  Returns +inf if a product overflows.
    """
    if not 1 <= i <= len(hist):
        raise IndexError(f"iteration index i={i} outside history of length {len(hist)}")
    prod = None
    best = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(i, 0, -1):
            pj = propagation_matrix(hist.alphas[j - 1], hist.betas[j - 1], shift)
            prod = pj if prod is None else prod @ pj
            nrm = matrix_2norm(prod)
            if nrm > best:
                best = nrm
            if np.isinf(best):
                break
    return best


@dataclass(frozen=True)
class ShiftSweep:
    """Amplification factor evaluated on a shift grid at a fixed iteration."""

    grid: np.ndarray
    psi_values: np.ndarray
    argmin: float
    iter: int


def select_shift(hist: CoefficientHistory, i: int, grid) -> ShiftSweep:
    """Evaluate the amplification factor on a grid and return the minimizer.

    Ties are broken toward the smaller shift.  The sweep intentionally uses
    one fixed coefficient history (normally from an unshifted run) for every
    grid point.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("shift grid must be nonempty")
    values = np.array([amplification_factor(hist, i, s) for s in grid])
    best = 0
    for k in range(1, len(grid)):
        if values[k] < values[best] or (values[k] == values[best] and grid[k] < grid[best]):
            best = k
    return ShiftSweep(grid, values, float(grid[best]), i)


def default_sigma_grid(A, M=None, npoints: int = 81) -> np.ndarray:
    """Shift grid from 0 to twice a Gershgorin-style bound of the operator.

    Log-spaced below 1 and linear above, since useful shifts span order of
    magnitude scales at the lower end while the upper end only needs to
    bracket the spectrum.  For a Jacobi preconditioner the bound is scaled
    by the diagonal.
    """
    counts = np.diff(A.row_ptr)
    rows = np.repeat(np.arange(A.n), counts)
    sums = np.zeros(A.n)
    np.add.at(sums, rows, np.abs(A.values))
    if M is not None and getattr(M, "kind", None) == "jacobi":
        hi = 2.0 * float((sums * M.inv_diag).max())
    else:
        hi = 2.0 * float(sums.max())
    if hi <= 1.0:
        body = np.geomspace(hi / 1000.0, hi, npoints - 1)
    else:
        n_log = (npoints - 1) // 3
        n_lin = npoints - 1 - n_log
        body = np.concatenate([
            np.geomspace(1e-2, 1.0, n_log, endpoint=False),
            np.linspace(1.0, hi, n_lin),
        ])
    return np.concatenate([[0.0], body])


class LocalErrorBounds(NamedTuple):
    """Per-iteration bounds on the rounding errors of the nine recurrences."""

    dx: float
    dt: float
    dr: float
    dp: float
    du: float
    ds: float
    dw: float
    dq: float
    dz: float


@dataclass(frozen=True)
class VectorNorms:
    """2-norms of the iteration vectors entering the local error bounds.

    ``s`` .. ``z`` are the current iteration's vectors, the ``*_prev``
    fields the previous iteration's.
    """

    x: float
    r: float
    u: float
    w: float
    s: float
    t: float
    p: float
    q: float
    z: float
    s_prev: float = 0.0
    t_prev: float = 0.0
    p_prev: float = 0.0
    q_prev: float = 0.0
    z_prev: float = 0.0


def local_error_bounds(record, norms: VectorNorms, A_norm: float, Minv_norm: float,
                       mu: int, mu_tilde: int, n: int, sigma: float,
                       eps: float = UNIT_ROUNDOFF) -> LocalErrorBounds:
    """Bounds on the nine local rounding errors of one fixed-shift iteration.

    ``record`` supplies the scalar coefficients (any object with ``alpha``
    and ``beta`` attributes works).  The vector norms must be measured from
    the run being analyzed; the result is a diagnostic envelope, every
    measured remainder should sit well below it.
    """
    a = abs(record.alpha)
    bt = abs(record.beta)
    sg = abs(sigma)
    rootn = np.sqrt(n)
    return LocalErrorBounds(
        dx=(norms.x + 2.0 * a * norms.p) * eps,
        dt=(norms.r + 2.0 * bt * norms.t_prev) * eps,
        dr=(norms.r + 3.0 * a * norms.s + 4.0 * a * sg * norms.t) * eps,
        dp=(norms.u + 2.0 * bt * norms.p_prev) * eps,
        du=(norms.u + 3.0 * a * norms.q + 4.0 * a * sg * norms.p) * eps,
        ds=(norms.w + 2.0 * bt * norms.s_prev) * eps,
        dw=(norms.w + 2.0 * a * norms.z) * eps,
        dq=((mu_tilde * rootn + 1.0) * Minv_norm * norms.w
            + 2.0 * bt * norms.q_prev) * eps,
        dz=((mu * rootn + mu_tilde * rootn + 1.0) * A_norm * Minv_norm * norms.w
            + 2.0 * bt * norms.z_prev) * eps,
    )


def local_error_bounds_variable(record, norms: VectorNorms, A_norm: float,
                                Minv_norm: float, mu: int, mu_tilde: int, n: int,
                                sigma_prev: float, sigma_cur: float,
                                eps: float = UNIT_ROUNDOFF) -> LocalErrorBounds:
    """Variable-shift counterpart; the shift difference enters s, w, q, z."""
    a = abs(record.alpha)
    bt = abs(record.beta)
    sg = abs(sigma_cur)
    dsg = abs(sigma_cur - sigma_prev)
    rootn = np.sqrt(n)
    return LocalErrorBounds(
        dx=(norms.x + 2.0 * a * norms.p) * eps,
        dt=(norms.r + 2.0 * bt * norms.t_prev) * eps,
        dr=(norms.r + 3.0 * a * norms.s + 4.0 * a * sg * norms.t) * eps,
        dp=(norms.u + 2.0 * bt * norms.p_prev) * eps,
        du=(norms.u + 3.0 * a * norms.q + 4.0 * a * sg * norms.p) * eps,
        ds=(norms.w + 3.0 * bt * norms.s_prev + 4.0 * dsg * norms.t) * eps,
        dw=(norms.w + 3.0 * a * norms.z + 4.0 * dsg * norms.r) * eps,
        dq=((mu_tilde * rootn + 1.0) * Minv_norm * norms.w
            + 3.0 * bt * norms.q_prev + 4.0 * dsg * norms.p) * eps,
        dz=((mu * rootn + mu_tilde * rootn + 1.0) * A_norm * Minv_norm * norms.w
            + 3.0 * bt * norms.z_prev + 5.0 * dsg * norms.s
            + 6.0 * dsg * sg * norms.t) * eps,
    )


def gap_epsilon_bounds(bounds: LocalErrorBounds, alpha: float, sigma: float,
                       A_norm: float) -> np.ndarray:
    """Bounds on the 4 combined error terms driving the gap recurrence.

    These are the norms of the inhomogeneous terms added to (f, g, h, j) in
    one iteration, assembled from the nine per-recurrence bounds.
    """
    a = abs(alpha)
    sg = abs(sigma)
    eg = A_norm * bounds.dp + sg * bounds.dt + bounds.ds
    ef = A_norm * bounds.dx + bounds.dr + a * eg
    ej = A_norm * bounds.dq + bounds.dz
    eh = (A_norm * bounds.du + sg * bounds.dr + bounds.dw
          + a * ej + a * sg * eg)
    return np.array([ef, eg, eh, ej])


def modeled_gap_evolution(hist: CoefficientHistory, eps_sequence, pi1,
                          sigma: float, absolute: bool = False) -> np.ndarray:
    """Forward recurrence of the gap 4-vector driven by per-iteration errors.

    Row k of the result is the gap stack after k iterations of propagation
    starting from ``pi1`` (row 0), with ``eps_sequence[k-1]`` injected at
    iteration k.  With ``absolute=True`` the propagation uses entrywise
    absolute values, turning nonnegative norm surrogates into a monotone
    upper-bound model; the default propagates signed data exactly.
    """
    eps_sequence = np.asarray(eps_sequence, dtype=np.float64)
    pi1 = np.asarray(pi1, dtype=np.float64)
    m = len(hist)
    if eps_sequence.shape != (m, 4):
        raise ValueError("eps_sequence must have one 4-vector per history entry")
    if pi1.shape != (4,):
        raise ValueError("pi1 must be a 4-vector")
    out = np.empty((m + 1, 4))
    out[0] = pi1
    for k in range(1, m + 1):
        pk = propagation_matrix(hist.alphas[k - 1], hist.betas[k - 1], sigma)
        if absolute:
            pk = np.abs(pk)
        out[k] = pk @ out[k - 1] + eps_sequence[k - 1]
    return out
