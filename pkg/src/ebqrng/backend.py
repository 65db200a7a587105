"""Kernel backend selection.

The compiled extension is preferred when it imports cleanly on a
little-endian host; the numpy implementation is the fallback. Override with
EBQRNG_BACKEND=py|ext or set_backend() (tests and benchmarks use both).
"""
from __future__ import annotations

import os
import sys

from . import _kernels_py

_BACKENDS = {"py": _kernels_py}

try:
    if sys.byteorder == "little":
        from . import _kernels as _kernels_ext

        _BACKENDS["ext"] = _kernels_ext
except ImportError:
    pass

_forced = os.environ.get("EBQRNG_BACKEND")
if _forced is not None and _forced not in _BACKENDS:
    raise ImportError(
        f"EBQRNG_BACKEND={_forced!r} not available; have {sorted(_BACKENDS)}"
    )

_active = _BACKENDS[_forced if _forced else ("ext" if "ext" in _BACKENDS else "py")]


def get_backend():
    """The module providing the hot kernels currently in use."""
    return _active


def set_backend(name: str):
    """Force a backend by name ('py' or 'ext'); returns the module."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; have {sorted(_BACKENDS)}")
    _active = _BACKENDS[name]
    return _active


def available_backends() -> list[str]:
    return sorted(_BACKENDS)
