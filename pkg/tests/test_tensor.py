import numpy as np
import pytest

from hbvla.errors import DimensionError, FormatError, TruncationError
from hbvla.tensor import (frobenius_distance, make_rng, matmul, read_tensor,
                          write_tensor)


def naive_matmul(a, b):
    # Independent triple-loop reference.
    n, k = a.shape
    k2, m = b.shape
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(k):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc
    return out


def test_npy_round_trip_f64(tmp_path):
    rng = make_rng(1)
    m = rng.normal(size=(3, 5))
    path = tmp_path / "m.npy"
    write_tensor(m, path)
    back = read_tensor(path)
    assert back.dtype == np.float64
    assert np.array_equal(back, m)
    # File-level round trip is bitwise.
    path2 = tmp_path / "m2.npy"
    write_tensor(back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_npy_round_trip_f32(tmp_path):
    rng = make_rng(2)
    m = rng.normal(size=(4, 2)).astype(np.float32)
    path = tmp_path / "m.npy"
    write_tensor(m, path)
    back = read_tensor(path)
    assert back.dtype == np.float32
    assert np.array_equal(back, m)


def test_npy_numpy_interop(tmp_path):
    # Our writer produces files numpy can read and vice versa.
    m = np.arange(6, dtype=np.float64).reshape(2, 3)
    ours = tmp_path / "ours.npy"
    write_tensor(m, ours)
    assert np.array_equal(np.load(ours), m)
    theirs = tmp_path / "theirs.npy"
    np.save(theirs, m)
    assert np.array_equal(read_tensor(theirs), m)


def test_read_small_fixture(tmp_path):
    m = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
    path = tmp_path / "m.npy"
    write_tensor(m, path)
    got = read_tensor(path)
    assert got.shape == (2, 2)
    assert got.ravel().tolist() == [1.0, 2.0, 3.0, 4.0]


def test_read_1d_promotes(tmp_path):
    path = tmp_path / "v.npy"
    np.save(path, np.array([1.0, 2.0, 3.0]))
    got = read_tensor(path)
    assert got.shape == (1, 3)


def test_truncation_error(tmp_path):
    path = tmp_path / "m.npy"
    write_tensor(np.zeros((3, 3)), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])  # drop one f8 value
    with pytest.raises(TruncationError):
        read_tensor(path)


def test_bad_magic(tmp_path):
    path = tmp_path / "m.npy"
    path.write_bytes(b"not a tensor file at all")
    with pytest.raises(FormatError, match="magic"):
        read_tensor(path)


def test_bad_dtype(tmp_path):
    path = tmp_path / "m.npy"
    np.save(path, np.zeros((2, 2), dtype=np.int32))
    with pytest.raises(FormatError, match="descr"):
        read_tensor(path)


def test_fortran_order_rejected(tmp_path):
    path = tmp_path / "m.npy"
    np.save(path, np.asfortranarray(np.ones((3, 2))))
    with pytest.raises(FormatError, match="fortran_order"):
        read_tensor(path)


def test_matmul_identity():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(matmul(np.eye(2), a), a)


def test_matmul_hand():
    out = matmul(np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]]))
    assert out.shape == (1, 1)
    assert out[0, 0] == 11.0


def test_matmul_vs_naive_oracle():
    rng = make_rng(3)
    a = rng.normal(size=(5, 7))
    b = rng.normal(size=(7, 3))
    got = matmul(a, b)
    want = naive_matmul(a, b)
    assert np.max(np.abs(got - want)) <= 1e-12 * np.max(np.abs(want))


def test_matmul_shape_error():
    with pytest.raises(DimensionError):
        matmul(np.zeros((2, 3)), np.zeros((2, 3)))


def test_matmul_associativity():
    rng = make_rng(4)
    for _ in range(10):
        a = rng.normal(size=(4, 5))
        b = rng.normal(size=(5, 6))
        c = rng.normal(size=(6, 3))
        left = matmul(matmul(a, b), c)
        right = matmul(a, matmul(b, c))
        assert np.allclose(left, right, rtol=1e-9)


def test_frobenius_basics():
    a = np.array([[3.0, 4.0]])
    assert frobenius_distance(a, a) == 0.0
    assert frobenius_distance(a, np.zeros((1, 2))) == 5.0
    with pytest.raises(DimensionError):
        frobenius_distance(a, np.zeros((2, 1)))


def test_frobenius_vs_scalar_oracle():
    rng = make_rng(5)
    a = rng.normal(size=(6, 4))
    b = rng.normal(size=(6, 4))
    acc = 0.0
    for i in range(6):
        for j in range(4):
            acc += (a[i, j] - b[i, j]) ** 2
    want = acc ** 0.5
    assert abs(frobenius_distance(a, b) - want) <= 1e-12 * want


def test_frobenius_triangle_inequality():
    rng = make_rng(6)
    for _ in range(20):
        a, b, c = (rng.normal(size=(3, 3)) for _ in range(3))
        assert frobenius_distance(a, c) <= (
            frobenius_distance(a, b) + frobenius_distance(b, c) + 1e-12)


def test_rng_reproducible():
    a = make_rng(42).normal(size=8)
    b = make_rng(42).normal(size=8)
    assert np.array_equal(a, b)
    c = make_rng(43).normal(size=8)
    assert not np.array_equal(a, c)
