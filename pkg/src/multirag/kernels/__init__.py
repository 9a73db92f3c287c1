"""Numeric kernel backends.

The compiled extension is used when built; otherwise the NumPy reference
takes over transparently. Set ``MULTIRAG_KERNEL_BACKEND=python`` to force
the reference implementation (used by the comparison benchmark).
"""

import os

from . import _pyref

if os.environ.get("MULTIRAG_KERNEL_BACKEND", "").lower() == "python":
    _impl = _pyref
    BACKEND = "python"
else:
    try:
        from . import _native as _impl

        BACKEND = "native"
    except ImportError:
        _impl = _pyref
        BACKEND = "python"

sq_diff_sum = _impl.sq_diff_sum
cosine_scores = _impl.cosine_scores


def get_backend(name):
    """Return (sq_diff_sum, cosine_scores) for an explicit backend name."""
    if name == "python":
        return _pyref.sq_diff_sum, _pyref.cosine_scores
    if name == "native":
        from . import _native

        return _native.sq_diff_sum, _native.cosine_scores
    raise ValueError(f"unknown kernel backend: {name!r}")
