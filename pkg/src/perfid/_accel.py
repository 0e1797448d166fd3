"""Optional numba acceleration.

Set ``PERFID_DISABLE_NUMBA=1`` to force the pure-numpy code paths; the same
happens automatically when numba cannot be imported.
"""
import os

NUMBA_ENABLED = False

if os.environ.get("PERFID_DISABLE_NUMBA", "").strip().lower() not in ("1", "true", "yes", "on"):
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - depends on the environment
        pass

if not NUMBA_ENABLED:

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(f):
            return f

        return wrap
