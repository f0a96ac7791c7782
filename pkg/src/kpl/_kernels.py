"""Compiled fixed-order kernels.

Every reduction here has a fully pinned summation order (no fastmath, no
reassociation), so results are bit-reproducible across runs and platforms:
dot products use an 8-lane interleaved accumulation with a fixed merge
tree (the rounding statistics of a vectorized BLAS reduction, but with an
order we own), sparse matrix-vector products accumulate strictly
left-to-right within each row.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def blocked_dot(u, v):
    n = u.size
    a0 = 0.0
    a1 = 0.0
    a2 = 0.0
    a3 = 0.0
    a4 = 0.0
    a5 = 0.0
    a6 = 0.0
    a7 = 0.0
    lim = n - (n % 8)
    k = 0
    while k < lim:
        a0 += u[k] * v[k]
        a1 += u[k + 1] * v[k + 1]
        a2 += u[k + 2] * v[k + 2]
        a3 += u[k + 3] * v[k + 3]
        a4 += u[k + 4] * v[k + 4]
        a5 += u[k + 5] * v[k + 5]
        a6 += u[k + 6] * v[k + 6]
        a7 += u[k + 7] * v[k + 7]
        k += 8
    tail = 0.0
    for j in range(lim, n):
        tail += u[j] * v[j]
    return (((a0 + a1) + (a2 + a3)) + ((a4 + a5) + (a6 + a7))) + tail


@njit(cache=True)
def csr_matvec(row_ptr, col_idx, values, v, out):
    # accumulator starts at +0.0, so an all-cancelling or empty row
    # yields +0.0, never -0.0
    for i in range(out.size):
        acc = 0.0
        for k in range(row_ptr[i], row_ptr[i + 1]):
            acc += values[k] * v[col_idx[k]]
        out[i] = acc


@njit(cache=True)
def lower_solve(row_ptr, col_idx, values, b, out):
    """Solve L y = b for lower-triangular CSR L (diagonal last in each row)."""
    for i in range(b.size):
        acc = b[i]
        last = row_ptr[i + 1] - 1
        for k in range(row_ptr[i], last):
            acc -= values[k] * out[col_idx[k]]
        out[i] = acc / values[last]


@njit(cache=True)
def upper_solve(row_ptr, col_idx, values, b, out):
    """Solve U x = b for upper-triangular CSR U (diagonal first in each row)."""
    for i in range(b.size - 1, -1, -1):
        acc = b[i]
        first = row_ptr[i]
        for k in range(first + 1, row_ptr[i + 1]):
            acc -= values[k] * out[col_idx[k]]
        out[i] = acc / values[first]


@njit(cache=True)
def ic0_factor(n, row_ptr, col_idx, a_values, l_values):
    """In-place IC(0) factorization on the lower-triangular pattern.

    ``a_values`` holds the (possibly diagonally compensated) entries of the
    lower triangle of A on the factor pattern; the result L is written to
    ``l_values``.  Columns are sorted within each row, so the diagonal is the
    last entry of row i.  Returns -1 on success, else the index of the first
    row whose pivot is not strictly positive.
    """
    for i in range(n):
        row_start = row_ptr[i]
        row_diag = row_ptr[i + 1] - 1
        for kk in range(row_start, row_diag):
            c = col_idx[kk]
            # dot of rows i and c over the shared strictly-lower pattern
            s = a_values[kk]
            p = row_start
            q = row_ptr[c]
            c_diag = row_ptr[c + 1] - 1
            while p < kk and q < c_diag:
                cp = col_idx[p]
                cq = col_idx[q]
                if cp == cq:
                    s -= l_values[p] * l_values[q]
                    p += 1
                    q += 1
                elif cp < cq:
                    p += 1
                else:
                    q += 1
            l_values[kk] = s / l_values[c_diag]
        d = a_values[row_diag]
        for kk in range(row_start, row_diag):
            d -= l_values[kk] * l_values[kk]
        if d <= 0.0:
            return i
        l_values[row_diag] = np.sqrt(d)
    return -1
