import gzip
import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kpl import (MatrixMarketError, SparseMatrix, laplacian_2d, random_spd,
                 read_matrix_market, write_matrix_market)


def read_str(text):
    return read_matrix_market(text.encode())


def test_symmetric_expansion_missing_diagonal():
    A = read_str(
        "%%MatrixMarket matrix coordinate real symmetric\n"
        "2 2 2\n"
        "1 1 4.0\n"
        "2 1 -1.0\n"
    )
    # stored lower triangle expands; absent (2,2) entry stays structurally zero
    assert np.array_equal(A.to_dense(), [[4.0, -1.0], [-1.0, 0.0]])


def test_general_with_numeric_symmetry_accepted():
    A = read_str(
        "%%MatrixMarket matrix coordinate real general\n"
        "2 2 3\n"
        "1 1 2.0\n"
        "1 2 -1.0\n"
        "2 1 -1.0\n"
    )
    assert np.array_equal(A.to_dense(), [[2.0, -1.0], [-1.0, 0.0]])


def test_general_asymmetric_rejected():
    with pytest.raises(MatrixMarketError):
        read_str(
            "%%MatrixMarket matrix coordinate real general\n"
            "2 2 2\n"
            "1 2 1.0\n"
            "2 1 0.5\n"
        )


def test_write_identity():
    sink = io.BytesIO()
    write_matrix_market(SparseMatrix.from_dense(np.eye(2)), sink)
    lines = sink.getvalue().decode().splitlines()
    assert lines[0] == "%%MatrixMarket matrix coordinate real symmetric"
    assert lines[1] == "2 2 2"
    assert lines[2:] == ["1 1 1", "2 2 1"]


def test_lower_triangle_entry_count():
    # 2x2 grid Laplacian: 4 diagonal plus 4 distinct sub-diagonal couplings
    sink = io.BytesIO()
    write_matrix_market(laplacian_2d(2, 2), sink)
    lines = [l for l in sink.getvalue().decode().splitlines() if l and not l.startswith("%")]
    assert lines[0].split()[2] == "8"
    assert len(lines) - 1 == 8


@given(st.integers(1, 12), st.integers(0, 10**6))
def test_roundtrip_bitwise(n, seed):
    A = random_spd(n, cond=20.0, seed=seed)
    sink = io.BytesIO()
    write_matrix_market(A, sink)
    B = read_matrix_market(sink.getvalue())
    assert B.n == A.n
    assert np.array_equal(B.row_ptr, A.row_ptr)
    assert np.array_equal(B.col_idx, A.col_idx)
    assert B.values.tobytes() == A.values.tobytes()


def test_gzip_transparent(tmp_path):
    A = laplacian_2d(3, 2)
    sink = io.BytesIO()
    write_matrix_market(A, sink)
    gz = tmp_path / "m.mtx.gz"
    gz.write_bytes(gzip.compress(sink.getvalue()))
    B = read_matrix_market(gz)
    assert np.array_equal(B.to_dense(), A.to_dense())


def test_file_path_roundtrip(tmp_path):
    A = laplacian_2d(2, 3)
    path = tmp_path / "m.mtx"
    write_matrix_market(A, path)
    B = read_matrix_market(str(path))
    assert B.values.tobytes() == A.values.tobytes()


@pytest.mark.parametrize("text,msg", [
    ("%%NotMatrixMarket matrix coordinate real symmetric\n1 1 1\n1 1 1.0\n",
     "header"),
    ("%%MatrixMarket matrix array real symmetric\n1 1\n1.0\n", "format"),
    ("%%MatrixMarket matrix coordinate complex symmetric\n1 1 1\n1 1 1.0 0.0\n",
     "field"),
    ("%%MatrixMarket matrix coordinate pattern symmetric\n1 1 1\n1 1\n", "field"),
    ("%%MatrixMarket matrix coordinate real skew-symmetric\n1 1 1\n1 1 1.0\n",
     "symmetry"),
    ("%%MatrixMarket matrix coordinate real symmetric\n2 3 1\n1 1 1.0\n",
     "square"),
    ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1.0\n",
     "range"),
    ("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n",
     "expected"),
])
def test_malformed_inputs(text, msg):
    with pytest.raises(MatrixMarketError, match=msg):
        read_str(text)


def test_integer_field_read_as_real():
    A = read_str(
        "%%MatrixMarket matrix coordinate integer symmetric\n"
        "2 2 2\n"
        "1 1 3\n"
        "2 2 5\n"
    )
    assert np.array_equal(A.to_dense(), [[3.0, 0.0], [0.0, 5.0]])


def test_comments_and_blank_lines_skipped():
    A = read_str(
        "%%MatrixMarket matrix coordinate real symmetric\n"
        "% a comment\n"
        "\n"
        "1 1 1\n"
        "% another\n"
        "1 1 2.5\n"
    )
    assert A.to_dense()[0, 0] == 2.5
