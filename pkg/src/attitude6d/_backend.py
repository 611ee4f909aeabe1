"""Kernel backend selection.

Hot loops are written once in a numba-compatible subset of Python. When numba
is importable and ``ATTITUDE6D_NUMBA`` is not set to ``0``, they are compiled
with ``numba.njit``; otherwise the same functions run as plain Python/numpy.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

USE_NUMBA = numba is not None and os.environ.get("ATTITUDE6D_NUMBA", "1") not in ("0", "false", "no")


def kernel(fn):
    """Compile ``fn`` with numba when enabled; keep the Python original as ``fn.py_func``."""
    if not USE_NUMBA:
        fn.py_func = fn
        return fn
    return numba.njit(cache=True, nogil=True)(fn)
