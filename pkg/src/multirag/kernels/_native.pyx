# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for the engine's two hot paths: squared-difference
sums over frame buffers and batched cosine scoring of a query against a
vector matrix.

Both kernels mirror ``multirag.kernels._pyref`` exactly: the squared-diff
sum is integer arithmetic (bit-exact everywhere) and the cosine scores use
sequential IEEE double summation in index order.
"""

from libc.math cimport sqrt

import numpy as np


def sq_diff_sum(const unsigned char[::1] a, const unsigned char[::1] b):
    """Sum of squared differences between two equal-length byte buffers."""
    cdef Py_ssize_t n = a.shape[0]
    if b.shape[0] != n:
        raise ValueError(
            "buffer length mismatch: %d vs %d" % (n, b.shape[0])
        )
    cdef long long total = 0
    cdef long long d
    cdef Py_ssize_t i
    for i in range(n):
        d = <long long> a[i] - <long long> b[i]
        total += d * d
    return total


def cosine_scores(const double[:, ::1] mat, const double[::1] norms,
                  const double[::1] q):
    """Cosine similarity of q against every row of mat.

    norms holds the precomputed Euclidean norm of each row; a row with zero
    norm (or a zero-norm query) scores 0.0 rather than dividing by zero.
    """
    cdef Py_ssize_t n = mat.shape[0]
    cdef Py_ssize_t d = mat.shape[1]
    if q.shape[0] != d:
        raise ValueError("dim mismatch: %d vs %d" % (d, q.shape[0]))
    if norms.shape[0] != n:
        raise ValueError("norms length mismatch: %d vs %d" % (norms.shape[0], n))
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] out_v = out
    cdef double qn = 0.0
    cdef double dot
    cdef Py_ssize_t i, j
    for j in range(d):
        qn += q[j] * q[j]
    qn = sqrt(qn)
    for i in range(n):
        if qn == 0.0 or norms[i] == 0.0:
            out_v[i] = 0.0
            continue
        dot = 0.0
        for j in range(d):
            dot += mat[i, j] * q[j]
        out_v[i] = dot / (norms[i] * qn)
    return out
