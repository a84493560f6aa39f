"""Optional numba acceleration.

Set ``MECPAOI_DISABLE_NUMBA=1`` to force the pure-numpy kernels. The flag is
read once at import time; individual calls can still pick a backend
explicitly.
"""
import os

_FLAG = os.environ.get("MECPAOI_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("disabled by MECPAOI_DISABLE_NUMBA")
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False


def default_backend():
    return "numba" if HAVE_NUMBA else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(fn):
        return fn

    return wrap
