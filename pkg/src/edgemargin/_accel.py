"""Numba switch.

Set ``EDGEMARGIN_NUMBA=0`` to run every kernel as plain Python/numpy.  The
flag is read once at import time.
"""
import os

USE_NUMBA = os.environ.get("EDGEMARGIN_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")

if USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a hard dependency, but stay usable without it
        USE_NUMBA = False


def njit(func):
    """``numba.njit(cache=True)`` when acceleration is on, identity otherwise."""
    if USE_NUMBA:
        return numba.njit(cache=True)(func)
    return func
