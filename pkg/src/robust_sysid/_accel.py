"""Optional numba acceleration.

Kernels in this package are written in the numpy subset that numba's nopython
mode understands, so the same source runs either jitted or as plain numpy.
Set ``ROBUST_SYSID_DISABLE_JIT=1`` before import to force the numpy path.
"""
import os

_DISABLED = os.environ.get("ROBUST_SYSID_DISABLE_JIT", "").strip().lower() in (
    "1",
    "true",
    "yes",
)

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:
    _njit = None
    HAS_NUMBA = False


def jit_kernel(func):
    """Compile ``func`` with numba when enabled, else return it unchanged.

    The uncompiled function stays reachable as ``.py_func`` in both cases so
    benchmarks and tests can compare the two paths.
    """
    if HAS_NUMBA:
        compiled = _njit(cache=True, nogil=True)(func)
        return compiled
    func.py_func = func
    return func


def backend_name():
    return "numba" if HAS_NUMBA else "numpy"
