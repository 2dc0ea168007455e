"""Optional numba acceleration.

Hot kernels are written twice: a loop version compiled with ``numba.njit``
and a vectorised numpy version. Which one is exported is decided once, at
import time. Set ``BSQKF_DISABLE_NUMBA=1`` to force the numpy path (numba
missing has the same effect).
"""
import os

_FLAG = os.environ.get("BSQKF_DISABLE_NUMBA", "").strip().lower()

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(fn):
    """Compile ``fn`` in nopython mode when numba is importable.

    Compilation happens even when the numpy path is selected so that the
    benchmark can compare both; it is lazy, so unused kernels cost nothing.
    """
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True)(fn)


def select(numba_impl, numpy_impl):
    return numba_impl if USE_NUMBA else numpy_impl
