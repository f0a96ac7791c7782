"""Sparse symmetric storage, deterministic level-1/2 kernels, and problem generators.

Matrices are CSR with sorted column indices and are validated to be
numerically symmetric on construction.  Dense vectors are plain 1-D
float64 ``numpy.ndarray``s; no wrapper type is used.

All kernels are deterministic with a pinned summation order, so repeated
runs (and algorithm variants that reduce to one another) are bit-identical:
``spmv`` accumulates left-to-right within each row, ``dot`` uses a fixed
8-lane blocked reduction whose rounding statistics match vectorized BLAS.
That last point is load-bearing: a strictly sequential dot injects enough
extra noise into the solver coefficients to visibly dampen the rounding
chaos that sets the attainable accuracy of the pipelined variants.
"""

from __future__ import annotations

import numpy as np

from . import _kernels

SYMMETRY_RTOL = 1e-14


class SparseMatrix:
    """Symmetric sparse matrix in CSR format.

    Parameters
    ----------
    n : int
        Dimension.
    row_ptr, col_idx, values : array_like
        CSR arrays: ``row_ptr`` has ``n + 1`` offsets, columns are strictly
        increasing within each row, and for every stored entry (i, j, v) the
        mirrored entry (j, i, v') must exist with ``|v - v'|`` within
        ``SYMMETRY_RTOL * max(|v|, 1)``.

    Attributes
    ----------
    mu : int
        Maximum number of stored entries in any row.
    """

    __slots__ = ("n", "row_ptr", "col_idx", "values", "mu")

    def __init__(self, n, row_ptr, col_idx, values):
        n = int(n)
        row_ptr = np.ascontiguousarray(row_ptr, dtype=np.int64)
        col_idx = np.ascontiguousarray(col_idx, dtype=np.int64)
        values = np.ascontiguousarray(values, dtype=np.float64)
        if n < 1:
            raise ValueError("matrix dimension must be >= 1")
        if row_ptr.shape != (n + 1,):
            raise ValueError("row_ptr must have n + 1 entries")
        if row_ptr[0] != 0 or row_ptr[-1] != len(values) or len(col_idx) != len(values):
            raise ValueError("row_ptr endpoints inconsistent with value count")
        counts = np.diff(row_ptr)
        if np.any(counts < 0):
            raise ValueError("row_ptr must be non-decreasing")
        if len(col_idx) and (col_idx.min() < 0 or col_idx.max() >= n):
            raise ValueError("column index out of range")
        rows = np.repeat(np.arange(n, dtype=np.int64), counts)
        if len(col_idx) > 1:
            same_row = rows[1:] == rows[:-1]
            if np.any(same_row & (col_idx[1:] <= col_idx[:-1])):
                raise ValueError("column indices must be strictly increasing within rows")
        self.n = n
        self.row_ptr = row_ptr
        self.col_idx = col_idx
        self.values = values
        self.mu = int(counts.max()) if n else 0
        self._check_symmetry(rows)

    def _check_symmetry(self, rows):
        order = np.lexsort((rows, self.col_idx))
        if not (np.array_equal(self.col_idx[order], rows)
                and np.array_equal(rows[order], self.col_idx)):
            raise ValueError("sparsity pattern is not symmetric")
        mirrored = self.values[order]
        tol = SYMMETRY_RTOL * np.maximum(np.abs(self.values), 1.0)
        bad = np.abs(self.values - mirrored) > tol
        if np.any(bad):
            k = int(np.nonzero(bad)[0][0])
            raise ValueError(
                f"matrix is not numerically symmetric at entry "
                f"({rows[k]}, {self.col_idx[k]})"
            )

    @classmethod
    def from_coo(cls, n, rows, cols, vals):
        """Build from coordinate triplets; duplicates are summed."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if len(rows) and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n):
            raise ValueError("coordinate index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if len(rows):
            keep = np.empty(len(rows), dtype=bool)
            keep[0] = True
            keep[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            group = np.cumsum(keep) - 1
            summed = np.zeros(int(group[-1]) + 1)
            np.add.at(summed, group, vals)
            rows, cols, vals = rows[keep], cols[keep], summed
        row_ptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(row_ptr, rows + 1, 1)
        np.cumsum(row_ptr, out=row_ptr)
        return cls(n, row_ptr, cols, vals)

    @classmethod
    def from_dense(cls, a, drop_tol=0.0):
        """Build from a dense symmetric array, dropping |entry| <= drop_tol."""
        a = np.asarray(a, dtype=np.float64)
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValueError("dense input must be square")
        rows, cols = np.nonzero(np.abs(a) > drop_tol)
        return cls.from_coo(n, rows, cols, a[rows, cols])

    def to_dense(self):
        out = np.zeros((self.n, self.n))
        for i in range(self.n):
            lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
            out[i, self.col_idx[lo:hi]] = self.values[lo:hi]
        return out

    def diagonal(self):
        d = np.zeros(self.n)
        for i in range(self.n):
            lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
            k = np.searchsorted(self.col_idx[lo:hi], i)
            if k < hi - lo and self.col_idx[lo + k] == i:
                d[i] = self.values[lo + k]
        return d

    def norm_inf(self):
        """Max absolute row sum; upper bound on the 2-norm for symmetric A."""
        counts = np.diff(self.row_ptr)
        sums = np.zeros(self.n)
        np.add.at(sums, np.repeat(np.arange(self.n), counts), np.abs(self.values))
        return float(sums.max())

    @property
    def nnz(self):
        return len(self.values)

    def __repr__(self):
        return f"SparseMatrix(n={self.n}, nnz={self.nnz}, mu={self.mu})"


def spmv(A: SparseMatrix, v: np.ndarray) -> np.ndarray:
    """w = A v with left-to-right accumulation within each row."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (A.n,):
        raise ValueError(f"dimension mismatch: matrix is {A.n}, vector is {v.shape}")
    out = np.empty(A.n)
    _kernels.csr_matvec(A.row_ptr, A.col_idx, A.values, v, out)
    return out


def dot(u: np.ndarray, v: np.ndarray) -> float:
    """Inner product with a fixed, bit-reproducible blocked summation order."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError("dimension mismatch in dot")
    return float(_kernels.blocked_dot(u, v))


def axpy(alpha: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """alpha * x + y, elementwise."""
    if x.shape != y.shape:
        raise ValueError("dimension mismatch in axpy")
    if alpha == 0.0:
        # exact copy: a zero coefficient must not flip -0.0 signs, so that
        # variants whose extra terms vanish stay bit-identical
        return y.copy()
    return alpha * x + y


def norm2(v: np.ndarray) -> float:
    """Euclidean norm via the sequential dot."""
    return float(np.sqrt(dot(v, v)))


def laplacian_2d(nx: int, ny: int) -> SparseMatrix:
    """Unscaled 5-point Laplacian on an nx-by-ny grid with Dirichlet truncation.

    Diagonal entries are 4, off-diagonals -1; no mesh-width scaling, so the
    spectrum sits in (0, 8) and the condition number grows with the grid.
    """
    if nx < 1 or ny < 1:
        raise ValueError("grid dimensions must be >= 1")
    n = nx * ny
    ids = np.arange(n, dtype=np.int64)
    ix = ids % nx
    iy = ids // nx
    rows = [ids]
    cols = [ids]
    vals = [np.full(n, 4.0)]
    for mask, shift in (
        (iy > 0, -nx),
        (ix > 0, -1),
        (ix < nx - 1, 1),
        (iy < ny - 1, nx),
    ):
        rows.append(ids[mask])
        cols.append(ids[mask] + shift)
        vals.append(np.full(int(mask.sum()), -1.0))
    return SparseMatrix.from_coo(
        n, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    )


def random_spd(n: int, cond: float = 100.0, seed: int = 0) -> SparseMatrix:
    """Dense random SPD test matrix (stored as CSR) with prescribed condition number.

    Eigenvalues are log-spaced in [1, cond] with a random orthogonal basis;
    the product is symmetrized exactly.
    """
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    lam = np.logspace(0.0, np.log10(cond), n) if n > 1 else np.ones(1)
    a = (q * lam) @ q.T
    a = (a + a.T) / 2.0
    return SparseMatrix.from_dense(a)
