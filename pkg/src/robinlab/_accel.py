"""Numba switch.

Set ``ROBINLAB_DISABLE_NUMBA=1`` to run every kernel through its pure-numpy
path.  When numba is missing the numpy path is used automatically.
"""
import os

_disabled = os.environ.get("ROBINLAB_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")

try:
    if _disabled:
        raise ImportError
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def use_numba():
    return HAS_NUMBA
