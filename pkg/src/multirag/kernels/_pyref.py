"""NumPy reference implementations of the compiled kernels.

Selected automatically when the extension module is not built; also the
baseline side of ``benchmarks/bench_kernels.py``. The squared-diff sum is
exact integer arithmetic and agrees bit-for-bit with the native kernel;
cosine scores agree to within a few ulps (BLAS may reorder the reduction).
"""

import numpy as np


def sq_diff_sum(a, b):
    if len(a) != len(b):
        raise ValueError(f"buffer length mismatch: {len(a)} vs {len(b)}")
    av = np.frombuffer(bytes(a), dtype=np.uint8).astype(np.int64)
    bv = np.frombuffer(bytes(b), dtype=np.uint8).astype(np.int64)
    d = av - bv
    return int(d @ d)


def cosine_scores(mat, norms, q):
    mat = np.ascontiguousarray(mat, dtype=np.float64)
    norms = np.asarray(norms, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[1] != q.shape[0]:
        raise ValueError(f"dim mismatch: {mat.shape[1] if mat.ndim == 2 else '?'} vs {q.shape[0]}")
    if norms.shape[0] != mat.shape[0]:
        raise ValueError(f"norms length mismatch: {norms.shape[0]} vs {mat.shape[0]}")
    qn = float(np.sqrt(q @ q))
    scores = np.zeros(mat.shape[0], dtype=np.float64)
    if qn == 0.0:
        return scores
    ok = norms != 0.0
    scores[ok] = (mat[ok] @ q) / (norms[ok] * qn)
    return scores
