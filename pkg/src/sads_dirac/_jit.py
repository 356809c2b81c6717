"""Numba switch.

Set ``SADS_DIRAC_DISABLE_NUMBA=1`` before import to force the pure-numpy
code paths (useful for debugging and for the kernel benchmark).
"""
import os

_DISABLED = os.environ.get("SADS_DIRAC_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn
        return wrap


def use_numba():
    return HAVE_NUMBA
