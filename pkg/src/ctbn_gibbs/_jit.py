"""Switch between numba-compiled kernels and the plain numpy path.

Set ``CTBN_GIBBS_DISABLE_JIT=1`` before import to run every kernel as
ordinary Python. Both paths execute the same source, so results agree
up to floating-point reassociation inside BLAS calls.
"""
import os

_FLAG = "CTBN_GIBBS_DISABLE_JIT"

JIT_DISABLED = os.environ.get(_FLAG, "").strip().lower() in ("1", "true", "yes", "on")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

JIT_ENABLED = numba is not None and not JIT_DISABLED


def njit(func=None, **options):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""
    options.setdefault("cache", True)

    def wrap(f):
        if not JIT_ENABLED:
            return f
        return numba.njit(**options)(f)

    if func is not None:
        return wrap(func)
    return wrap
