"""Backend selection for the hot numeric kernels.

Two implementations exist for every hot kernel: a numba ``@njit`` version and a
pure-numpy fallback.  The active one is chosen once at import time:

* ``GAMECHURN_BACKEND=numba``  force numba (ImportError if unavailable)
* ``GAMECHURN_BACKEND=numpy``  force the pure-numpy fallback
* unset / ``auto``             numba when importable, numpy otherwise
"""

import os

_requested = os.environ.get("GAMECHURN_BACKEND", "auto").strip().lower()

if _requested not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"GAMECHURN_BACKEND must be 'auto', 'numba' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    HAS_NUMBA = False
else:
    try:
        from numba import njit  # noqa: F401

        HAS_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise
        HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and _requested != "numpy"
BACKEND = "numba" if USE_NUMBA else "numpy"


def jit(func):
    """Compile ``func`` with numba when the numba backend is active."""
    if USE_NUMBA:
        return njit(cache=True)(func)
    return func
