"""Backend selection for the numeric kernels.

Two interchangeable implementations exist: numba-jitted loops (default)
and pure numpy (fallback).  The environment variable ``FIXLAB_NUMBA``
picks the starting backend: set it to ``0``/``off``/``false`` to force
the numpy path.  When numba is not importable the numpy path is used
regardless, with a one-time warning.

``set_backend`` / ``use`` exist so tests and the benchmark script can
exercise both paths in one process.
"""

from __future__ import annotations

import os
import warnings
from contextlib import contextmanager
from typing import Iterator

_FALSELIKE = ("0", "off", "false", "no")

_numba_available: bool | None = None
_active: str | None = None


def numba_available() -> bool:
    """True when numba can actually be imported."""
    global _numba_available
    if _numba_available is None:
        try:
            import numba  # noqa: F401

            _numba_available = True
        except ImportError:
            _numba_available = False
    return _numba_available


def _initial_backend() -> str:
    flag = os.environ.get("FIXLAB_NUMBA", "1").strip().lower()
    if flag in _FALSELIKE:
        return "numpy"
    if not numba_available():
        warnings.warn(
            "numba is not installed; falling back to the pure-numpy kernels",
            RuntimeWarning,
            stacklevel=2,
        )
        return "numpy"
    return "numba"


def active() -> str:
    """Name of the backend in effect: ``"numba"`` or ``"numpy"``."""
    global _active
    if _active is None:
        _active = _initial_backend()
    return _active


def set_backend(name: str) -> None:
    global _active
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r} (expected 'numba' or 'numpy')")
    if name == "numba" and not numba_available():
        raise RuntimeError("numba backend requested but numba is not importable")
    _active = name


@contextmanager
def use(name: str) -> Iterator[None]:
    """Temporarily switch backends (used by tests and the benchmark)."""
    previous = active()
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)
