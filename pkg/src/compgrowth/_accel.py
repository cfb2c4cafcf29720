"""Numba switch.

Set ``COMPGROWTH_DISABLE_NUMBA=1`` to route every hot kernel through its
numpy/scipy fallback instead of the compiled path.
"""
import os

_FLAG = os.environ.get("COMPGROWTH_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit_options():
    return dict(cache=True, nogil=True, fastmath=False, error_model="numpy")


def njit(fn):
    """Compile ``fn`` when numba is available; otherwise hand it back untouched."""
    if not HAS_NUMBA:
        return fn
    return numba.njit(**njit_options())(fn)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
