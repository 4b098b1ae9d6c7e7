"""Kernel backend selection.

Hot loops are written twice: a numba-compiled version and a vectorised
numpy version. ``UDOCRP_BACKEND=numpy`` forces the fallback; the default
is numba when it imports cleanly.
"""
from __future__ import annotations

import os

try:
    import numba as _numba
except ImportError:  # pragma: no cover - exercised only without numba
    _numba = None

HAVE_NUMBA = _numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if _numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn
    kwargs.setdefault("cache", True)
    return _numba.njit(*args, **kwargs)


def backend() -> str:
    want = os.environ.get("UDOCRP_BACKEND", "").strip().lower()
    if want in ("numpy", "python", "fallback"):
        return "numpy"
    if want == "numba" and not HAVE_NUMBA:
        raise RuntimeError("UDOCRP_BACKEND=numba but numba is not importable")
    return "numba" if HAVE_NUMBA else "numpy"


def use_numba(override: str | None = None) -> bool:
    if override is not None:
        if override not in ("numba", "numpy"):
            raise ValueError(f"unknown backend {override!r}")
        if override == "numba" and not HAVE_NUMBA:
            raise RuntimeError("numba is not importable")
        return override == "numba"
    return backend() == "numba"
