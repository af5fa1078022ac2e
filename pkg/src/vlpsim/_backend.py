"""Solver-kernel backend selection.

The compiled extension is preferred when importable; the pure-numpy twin is
the fallback. Set ``VLPSIM_BACKEND=python`` (or ``compiled``) to force a
choice, e.g. for benchmarking or debugging.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_py


def _load(name: str) -> ModuleType:
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels_cy  # type: ignore[attr-defined]

        return _kernels_cy
    raise ValueError(f"unknown backend {name!r} (expected 'python' or 'compiled')")


def available_backends() -> tuple:
    names = ["python"]
    try:
        _load("compiled")
        names.insert(0, "compiled")
    except ImportError:
        pass
    return tuple(names)


def get_kernels(name: str | None = None) -> ModuleType:
    """Return a kernel module by name, or the best available by default."""
    if name:
        return _load(name)
    forced = os.environ.get("VLPSIM_BACKEND", "").strip().lower()
    if forced:
        return _load(forced)
    try:
        return _load("compiled")
    except ImportError:
        return _kernels_py


kernels = get_kernels()
BACKEND = kernels.backend_name
