"""Preconditioners: identity, Jacobi diagonal, and compensated IC(0).

The IC(0) factor keeps the sparsity pattern of the lower triangle of A.
Compensation follows the usual convention: for a shift ``eta`` the factor
is built from A + eta * diag(diag(A)), which avoids pivot breakdown on
matrices that are not quite diagonally dominant.

All preconditioners apply a symmetric positive definite operator and are
immutable once constructed.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .sparse import SparseMatrix, dot, norm2


class PreconditionerBreakdown(ArithmeticError):
    """IC(0) hit a nonpositive pivot."""

    def __init__(self, row):
        self.row = row
        super().__init__(f"nonpositive pivot in IC(0) factorization at row {row}")


def _lower_triangle(A: SparseMatrix, eta: float):
    """CSR arrays of the lower triangle of A with the diagonal scaled by 1 + eta."""
    row_ptr = np.zeros(A.n + 1, dtype=np.int64)
    counts = np.diff(A.row_ptr)
    rows = np.repeat(np.arange(A.n, dtype=np.int64), counts)
    keep = A.col_idx <= rows
    cols = A.col_idx[keep]
    vals = A.values[keep].copy()
    np.add.at(row_ptr, rows[keep] + 1, 1)
    np.cumsum(row_ptr, out=row_ptr)
    diag_pos = row_ptr[1:] - 1
    if np.any(row_ptr[1:] == row_ptr[:-1]) or np.any(cols[diag_pos] != np.arange(A.n)):
        raise ValueError("matrix has a structurally missing diagonal entry")
    if eta:
        vals[diag_pos] *= 1.0 + eta
    return row_ptr, cols, vals


def _transpose_csr(n, row_ptr, col_idx, values):
    counts = np.diff(row_ptr)
    rows = np.repeat(np.arange(n, dtype=np.int64), counts)
    order = np.lexsort((rows, col_idx))
    t_ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(t_ptr, col_idx + 1, 1)
    np.cumsum(t_ptr, out=t_ptr)
    return t_ptr, rows[order], values[order]


class Preconditioner:
    """Operator approximating the inverse of A; ``apply`` evaluates it.

    ``mu_tilde`` bounds the nonzeros per row of the operator representation
    (1 for identity/Jacobi; the max row count of L + L^T for IC(0)), as used
    by the rounding-error bounds.
    """

    __slots__ = ("kind", "inv_diag", "_l", "_lt", "mu_tilde", "_norm_estimate")

    def __init__(self, kind, inv_diag=None, lower=None, mu_tilde=1):
        self.kind = kind
        self.inv_diag = inv_diag
        self._l = lower
        self._lt = None if lower is None else _transpose_csr(len(lower[0]) - 1, *lower)
        self.mu_tilde = mu_tilde
        self._norm_estimate = None

    @property
    def n(self):
        if self.inv_diag is not None:
            return len(self.inv_diag)
        if self._l is not None:
            return len(self._l[0]) - 1
        return None

    def apply(self, v: np.ndarray) -> np.ndarray:
        """M^{-1} v.  Identity returns v itself (bitwise)."""
        if self.kind == "identity":
            return v
        if v.shape != (self.n,):
            raise ValueError("dimension mismatch in preconditioner apply")
        if self.kind == "jacobi":
            return v * self.inv_diag
        y = np.empty(self.n)
        out = np.empty(self.n)
        _kernels.lower_solve(*self._l, v, y)
        _kernels.upper_solve(*self._lt, y, out)
        return out

    def norm_estimate(self) -> float:
        """Estimate of ||M^{-1}||_2, used only in diagnostic error bounds."""
        if self._norm_estimate is None:
            if self.kind == "identity":
                self._norm_estimate = 1.0
            elif self.kind == "jacobi":
                self._norm_estimate = float(self.inv_diag.max())
            else:
                # power iteration on the applied SPD operator
                v = np.full(self.n, 1.0 / np.sqrt(self.n))
                lam = 1.0
                for _ in range(20):
                    w = self.apply(v)
                    lam = dot(v, w)
                    nw = norm2(w)
                    if nw == 0.0:
                        break
                    v = w / nw
                self._norm_estimate = abs(float(lam))
        return self._norm_estimate

    def __repr__(self):
        return f"Preconditioner(kind={self.kind!r}, n={self.n})"


def identity() -> Preconditioner:
    return Preconditioner("identity")


def make_jacobi(A: SparseMatrix) -> Preconditioner:
    """Inverse-diagonal preconditioner; requires a strictly positive diagonal."""
    d = A.diagonal()
    bad = np.nonzero(d <= 0.0)[0]
    if len(bad):
        raise ValueError(f"nonpositive diagonal entry at row {bad[0]}")
    return Preconditioner("jacobi", inv_diag=1.0 / d)


def make_ic0(A: SparseMatrix, eta: float = 0.0) -> Preconditioner:
    """Incomplete Cholesky on the pattern of lower(A), with diagonal compensation.

    Factorizes A + eta * diag(diag(A)); apply performs the forward/backward
    substitution pair.  Raises :class:`PreconditionerBreakdown` with the row
    index if a pivot is not strictly positive.
    """
    if eta < 0.0:
        raise ValueError("compensation shift eta must be >= 0")
    row_ptr, col_idx, a_vals = _lower_triangle(A, eta)
    l_vals = np.zeros_like(a_vals)
    bad_row = _kernels.ic0_factor(A.n, row_ptr, col_idx, a_vals, l_vals)
    if bad_row >= 0:
        raise PreconditionerBreakdown(int(bad_row))
    lower = (row_ptr, col_idx, l_vals)
    # pattern of L + L^T governs how many stored entries one solve touches per row
    counts = np.diff(row_ptr)
    t_counts = np.zeros(A.n, dtype=np.int64)
    np.add.at(t_counts, col_idx, 1)
    mu_tilde = int((counts + t_counts - 1).max())
    return Preconditioner("ic0", lower=lower, mu_tilde=mu_tilde)
