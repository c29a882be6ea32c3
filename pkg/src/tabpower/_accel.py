"""Optional numba acceleration.

Set ``TABPOWER_NUMBA=0`` in the environment to force the pure-numpy paths.
The flag is read once, at import time.
"""

import os

_FLAG = os.environ.get("TABPOWER_NUMBA", "1").strip().lower()

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a soft dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("0", "false", "no", "off")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise.

    Decorated functions are always compiled when numba exists, so the
    benchmark can compare both paths regardless of ``USE_NUMBA``.
    """
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        return numba.njit(*args, **kwargs)

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def _wrap(func):
        return func

    return _wrap
