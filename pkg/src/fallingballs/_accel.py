"""Numba switch.

Set ``FALLINGBALLS_DISABLE_NUMBA=1`` to run every kernel as plain Python on
numpy arrays. The kernels are written so that both paths execute the same
source; ``kernel.py_func`` exposes the interpreted version when numba is on.
"""
import os

_FLAG = os.environ.get("FALLINGBALLS_DISABLE_NUMBA", "").strip().lower()
DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and not DISABLED


def njit(func=None, **options):
    options.setdefault("cache", True)

    def wrap(f):
        if USE_NUMBA:
            return numba.njit(**options)(f)
        f.py_func = f
        return f

    if func is None:
        return wrap
    return wrap(func)
