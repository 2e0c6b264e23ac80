"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
fallback takes over.  ``CONLEY_TRANSIT_BACKEND=python`` forces the fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _fallback

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def available() -> list[str]:
    return ["cython", "python"] if _ckernels is not None else ["python"]


def get_backend(name: str | None = None) -> ModuleType:
    """Backend module by name; ``None`` means the default selection."""
    if name is None:
        name = os.environ.get("CONLEY_TRANSIT_BACKEND", "").strip().lower() or None
    if name in (None, "auto"):
        return _ckernels if _ckernels is not None else _fallback
    if name == "python":
        return _fallback
    if name == "cython":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built")
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


backend = get_backend()
BACKEND = backend.NAME
