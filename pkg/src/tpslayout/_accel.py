"""Backend selection for the hot kernels.

Every per-pixel kernel in the package exists twice: a numba ``@njit`` loop and
a vectorized NumPy version.  The numba path is used when numba imports and the
``TPSLAYOUT_DISABLE_NUMBA`` environment variable is unset (or ``0``).  Tests
and the benchmark switch backends at runtime with :func:`use_backend`.
"""

from __future__ import annotations

import contextlib
import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_FLAG = os.environ.get("TPSLAYOUT_DISABLE_NUMBA", "0").strip().lower()
_backend = "numba" if HAVE_NUMBA and _FLAG in ("", "0", "false", "no") else "numpy"


def njit(fn):
    """``numba.njit(cache=True)`` when numba is importable, else the plain function."""
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _backend = name


@contextlib.contextmanager
def use_backend(name: str):
    previous = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def dispatch(numba_fn, numpy_fn):
    """Pick the implementation for the active backend at call time."""

    def call(*args):
        if _backend == "numba":
            return numba_fn(*args)
        return numpy_fn(*args)

    call.__name__ = getattr(numpy_fn, "__name__", "kernel").replace("_np", "")
    call.numba = numba_fn
    call.numpy = numpy_fn
    return call
