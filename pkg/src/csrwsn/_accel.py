"""Numba availability switch.

Set ``CSRWSN_DISABLE_NUMBA=1`` to force the pure-numpy kernels.  The flag is
read once at import time.
"""

import os

_DISABLED = os.environ.get("CSRWSN_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
    "on",
)

try:
    if _DISABLED:
        raise ImportError("numba disabled by CSRWSN_DISABLE_NUMBA")
    from numba import njit as _njit

    NUMBA_ENABLED = True
except ImportError:
    _njit = None
    NUMBA_ENABLED = False


def jit(func):
    """Compile ``func`` with numba when enabled; otherwise leave it as Python."""
    if NUMBA_ENABLED:
        return _njit(cache=True)(func)
    return func
