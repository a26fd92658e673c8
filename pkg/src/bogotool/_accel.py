"""Backend selection for the hot pair-sum kernels.

Set ``BOGOTOOL_NUMBA=0`` to force the pure-numpy paths.  Both paths are
always importable so they can be compared against each other.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # avoid probing an outdated TBB; the portable layer is enough here
        numba.config.THREADING_LAYER = "workqueue"
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False


def _flag(name, default):
    val = os.environ.get(name)
    if val is None:
        return default
    return val.strip().lower() not in ("0", "false", "no", "off", "")


USE_NUMBA = HAVE_NUMBA and _flag("BOGOTOOL_NUMBA", True)


def njit(*args, **kwargs):
    """``numba.njit`` when numba is installed, otherwise the identity."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


prange = numba.prange if HAVE_NUMBA else range


def set_threads(n=None):
    """Apply ``BOGOTOOL_THREADS`` (or an explicit count) to numba."""
    if n is None:
        env = os.environ.get("BOGOTOOL_THREADS")
        if not env:
            return
        n = int(env)
    if HAVE_NUMBA:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
