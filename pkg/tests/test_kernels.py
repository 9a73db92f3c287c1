"""Parity between the compiled kernels and the NumPy reference."""

from __future__ import annotations

import numpy as np
import pytest

from multirag import kernels


def naive_sq_diff_sum(a: bytes, b: bytes) -> int:
    total = 0
    for x, y in zip(a, b):
        d = x - y
        total += d * d
    return total


def test_backend_reports_a_name():
    assert kernels.BACKEND in ("native", "python")


def test_sq_diff_sum_identical_is_zero():
    buf = bytes(range(256))
    assert kernels.sq_diff_sum(buf, buf) == 0


def test_sq_diff_sum_hand_example():
    # diffs 1,2,3,4 -> squares sum to 30
    assert kernels.sq_diff_sum(bytes([1, 2, 3, 4]), bytes([2, 4, 6, 8])) == 30


def test_sq_diff_sum_max_contrast():
    a = bytes([0] * 10)
    b = bytes([255] * 10)
    assert kernels.sq_diff_sum(a, b) == 65025 * 10


def test_sq_diff_sum_length_mismatch():
    with pytest.raises(ValueError):
        kernels.sq_diff_sum(bytes(3), bytes(4))


def test_sq_diff_sum_matches_naive_loop():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(1, 500))
        a = bytes(rng.integers(0, 256, size=n, dtype=np.uint8))
        b = bytes(rng.integers(0, 256, size=n, dtype=np.uint8))
        assert kernels.sq_diff_sum(a, b) == naive_sq_diff_sum(a, b)


def test_backends_agree_on_sq_diff_sum():
    try:
        native_sq, _ = kernels.get_backend("native")
    except ImportError:
        pytest.skip("native kernels not built")
    python_sq, _ = kernels.get_backend("python")
    rng = np.random.default_rng(11)
    a = bytes(rng.integers(0, 256, size=4096, dtype=np.uint8))
    b = bytes(rng.integers(0, 256, size=4096, dtype=np.uint8))
    assert native_sq(np.frombuffer(a, np.uint8), np.frombuffer(b, np.uint8)) == python_sq(a, b)


def test_cosine_scores_against_manual_loop():
    rng = np.random.default_rng(3)
    mat = np.ascontiguousarray(rng.normal(size=(40, 8)))
    q = np.ascontiguousarray(rng.normal(size=8))
    norms = np.sqrt(np.einsum("ij,ij->i", mat, mat))
    got = kernels.cosine_scores(mat, norms, q)
    qn = float(np.sqrt(np.dot(q, q)))
    for i in range(mat.shape[0]):
        want = float(np.dot(mat[i], q)) / (norms[i] * qn)
        assert got[i] == pytest.approx(want, rel=1e-12)


def test_cosine_scores_zero_norm_rows_and_query():
    mat = np.ascontiguousarray([[0.0, 0.0], [1.0, 0.0]])
    norms = np.array([0.0, 1.0])
    got = kernels.cosine_scores(mat, norms, np.array([1.0, 0.0]))
    assert got[0] == 0.0 and got[1] == pytest.approx(1.0)
    got = kernels.cosine_scores(mat, norms, np.array([0.0, 0.0]))
    assert list(got) == [0.0, 0.0]


def test_cosine_scores_dim_mismatch():
    mat = np.ascontiguousarray([[1.0, 2.0]])
    with pytest.raises(ValueError):
        kernels.cosine_scores(mat, np.array([1.0]), np.array([1.0, 2.0, 3.0]))


def test_backends_agree_on_cosine_scores():
    try:
        _, native_cos = kernels.get_backend("native")
    except ImportError:
        pytest.skip("native kernels not built")
    _, python_cos = kernels.get_backend("python")
    rng = np.random.default_rng(5)
    mat = np.ascontiguousarray(rng.normal(size=(64, 32)))
    norms = np.sqrt(np.einsum("ij,ij->i", mat, mat))
    q = np.ascontiguousarray(rng.normal(size=32))
    a = native_cos(mat, norms, q)
    b = python_cos(mat, norms, q)
    assert np.allclose(a, b, rtol=1e-12, atol=0.0)
