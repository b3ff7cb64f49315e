"""JIT switch.

Hot kernels are written twice: a numba ``@njit`` loop and a vectorised numpy
fallback.  ``IDSLAB_NO_JIT=1`` (or a missing numba) selects the fallback; both
paths produce bit-identical results.
"""
from __future__ import annotations

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

JIT_DISABLED = os.environ.get("IDSLAB_NO_JIT", "0").strip().lower() not in ("", "0", "false", "no")
HAVE_NUMBA = numba is not None
USE_JIT = HAVE_NUMBA and not JIT_DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise."""
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
