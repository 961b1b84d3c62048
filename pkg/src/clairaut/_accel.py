"""Backend selection for the compiled kernels.

``CLAIRAUT_NUMBA=0`` (or ``false``/``no``/``off``) forces the pure numpy path.
If numba cannot be imported the numpy path is used regardless.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get("CLAIRAUT_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


def jit(fn):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise."""
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True)(fn)


def default_backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
