"""Kernel dispatch: the compiled extension when importable, numpy otherwise.

Set ``TEMPOGRAPH_PURE_PYTHON=1`` to force the numpy fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("TEMPOGRAPH_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py

AND, OR, ANDNOT = 0, 1, 2

normalize = _impl.normalize
combine = _impl.combine
csr_expand = _impl.csr_expand
overlap_pairs = _impl.overlap_pairs
relate_arrays = _impl.relate_arrays

CMP_CODES = {
    "FULLY_BEFORE": 0,
    "STARTS_BEFORE": 1,
    "FULLY_AFTER": 2,
    "STARTS_AFTER": 3,
    "DURING": 4,
    "EQUALS": 5,
    "DURING_OR_EQUALS": 6,
    "OVERLAPS": 7,
    "NOT_OVERLAPS": 8,
}


def implementations():
    """Both backends, for equivalence tests and benchmarks."""
    impls = {"python": _kernels_py}
    try:
        from . import _kernels

        impls["cython"] = _kernels
    except ImportError:
        pass
    return impls
