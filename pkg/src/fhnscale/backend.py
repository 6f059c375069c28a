"""Selection between numba-jitted and pure-numpy hot loops.

The jitted path is the default whenever numba imports cleanly.  Setting the
environment variable ``FHNSCALE_NUMBA`` to ``0``/``false``/``off`` before
import forces the pure-numpy fallback.  Both paths are deterministic: every
reduction runs in a fixed order independent of thread count.
"""

from __future__ import annotations

import os


def _env_enabled() -> bool:
    value = os.environ.get("FHNSCALE_NUMBA", "1").strip().lower()
    return value not in {"0", "false", "off", "no"}


try:
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    _numba = None
    HAVE_NUMBA = False

NUMBA_ENABLED = HAVE_NUMBA and _env_enabled()


if NUMBA_ENABLED:

    def njit(*args, **kwargs):
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)

else:

    def njit(*args, **kwargs):
        # Pass-through decorator; the plain-python versions are never the
        # dispatched implementations, they only exist for benchmarking.
        if args and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
