"""Matrix Market coordinate I/O for symmetric real matrices.

The reader accepts ``symmetric`` files (either triangle stored, expanded on
read) and ``general`` files whose entries happen to be numerically symmetric;
mirrors differ in which convention they use.  Gzip-compressed input is
detected from the magic bytes.  The writer emits the lower triangle only,
with 17 significant digits so that write-then-read round-trips bitwise.
"""

from __future__ import annotations

import gzip
import io
import os

import numpy as np

from .sparse import SparseMatrix


class MatrixMarketError(ValueError):
    """Malformed or unsupported Matrix Market content."""


def _open_source(source):
    if isinstance(source, (str, os.PathLike)):
        raw = open(source, "rb")
    elif isinstance(source, (bytes, bytearray)):
        raw = io.BytesIO(source)
    else:
        raw = source
    head = raw.read(2)
    rest = raw.read()
    data = head + rest
    if head == b"\x1f\x8b":
        data = gzip.decompress(data)
    return io.StringIO(data.decode("ascii", errors="replace"))


def read_matrix_market(source) -> SparseMatrix:
    """Parse a coordinate real symmetric (or numerically symmetric general) file.

    ``source`` may be a path, raw bytes, or a binary file object; gzip input
    is transparent.  One-based indices are converted to zero-based and the
    stored triangle of a symmetric file is mirrored.
    """
    text = _open_source(source)
    header = text.readline()
    parts = header.strip().split()
    if len(parts) != 5 or parts[0] != "%%MatrixMarket":
        raise MatrixMarketError(f"malformed header: {header.strip()!r}")
    obj, fmt, field, symmetry = (p.lower() for p in parts[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise MatrixMarketError(f"unsupported object/format: {obj} {fmt}")
    if field not in ("real", "integer"):
        raise MatrixMarketError(f"unsupported field (need real values): {field}")
    if symmetry not in ("symmetric", "general"):
        raise MatrixMarketError(f"unsupported symmetry: {symmetry}")

    line = text.readline()
    while line and (line.startswith("%") or not line.strip()):
        line = text.readline()
    size = line.split()
    if len(size) != 3:
        raise MatrixMarketError(f"malformed size line: {line.strip()!r}")
    nrows, ncols, nnz = (int(s) for s in size)
    if nrows != ncols:
        raise MatrixMarketError(f"matrix is not square: {nrows} x {ncols}")

    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    k = 0
    for line in text:
        if line.startswith("%") or not line.strip():
            continue
        if k >= nnz:
            raise MatrixMarketError("more entries than declared")
        fields = line.split()
        if len(fields) != 3:
            raise MatrixMarketError(f"malformed entry line: {line.strip()!r}")
        i, j = int(fields[0]) - 1, int(fields[1]) - 1
        if not (0 <= i < nrows and 0 <= j < ncols):
            raise MatrixMarketError(f"index out of range on entry {k + 1}")
        rows[k], cols[k], vals[k] = i, j, float(fields[2])
        k += 1
    if k != nnz:
        raise MatrixMarketError(f"expected {nnz} entries, found {k}")

    if symmetry == "symmetric":
        off = rows != cols
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, vals[off]]),
        )
    try:
        return SparseMatrix.from_coo(nrows, rows, cols, vals)
    except ValueError as exc:
        raise MatrixMarketError(str(exc)) from exc


def write_matrix_market(A: SparseMatrix, sink) -> None:
    """Write the lower triangle in coordinate real symmetric format."""
    own = isinstance(sink, (str, os.PathLike))
    fh = open(sink, "wb") if own else sink
    try:
        lines = ["%%MatrixMarket matrix coordinate real symmetric\n"]
        entries = []
        for i in range(A.n):
            lo, hi = A.row_ptr[i], A.row_ptr[i + 1]
            for k in range(lo, hi):
                j = A.col_idx[k]
                if j <= i:
                    entries.append((i + 1, j + 1, A.values[k]))
        lines.append(f"{A.n} {A.n} {len(entries)}\n")
        for i, j, v in entries:
            lines.append("%d %d %.17g\n" % (i, j, v))
        fh.write("".join(lines).encode("ascii"))
    finally:
        if own:
            fh.close()
