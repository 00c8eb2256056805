"""Optional numba acceleration.

Kernels are compiled with numba unless ``DISSGADGETS_DISABLE_NUMBA`` is set to
a truthy value, in which case the pure numpy implementations are used.
"""

import os

DISABLE_ENV = "DISSGADGETS_DISABLE_NUMBA"

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _njit = None
    HAVE_NUMBA = False


def numba_disabled_by_env():
    return os.environ.get(DISABLE_ENV, "").strip().lower() in {"1", "true", "yes", "on"}


USE_NUMBA = HAVE_NUMBA and not numba_disabled_by_env()


def optional_njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise.

    The compiled object keeps the original function on ``.py_func``.
    """

    def decorator(func):
        if HAVE_NUMBA:
            return _njit(*args, **kwargs)(func)
        return func

    return decorator


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
