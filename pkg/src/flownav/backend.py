"""Kernel backend selection: numba JIT by default, pure numpy as fallback.

The environment variable ``FLOWNAV_BACKEND`` picks the backend at import
time: ``numba`` (error if numba is unavailable), ``numpy``, or ``auto``
(default: numba when importable, numpy otherwise). Tests and the benchmark
switch programmatically via :func:`set_backend`.

Both backends implement the same kernel signatures and agree numerically to
float round-off; ``benchmarks/bench_backends.py`` compares their speed.
"""

from __future__ import annotations

import os

_VALID = ("numba", "numpy")

_active: str | None = None


def _numba_usable() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _resolve(requested: str) -> str:
    if requested == "auto":
        return "numba" if _numba_usable() else "numpy"
    if requested not in _VALID:
        raise ValueError(f"unknown backend {requested!r}; expected one of {_VALID + ('auto',)}")
    if requested == "numba" and not _numba_usable():
        raise RuntimeError("FLOWNAV_BACKEND=numba but numba is not importable")
    return requested


def active_backend() -> str:
    """Name of the kernel backend in use ('numba' or 'numpy')."""
    global _active
    if _active is None:
        _active = _resolve(os.environ.get("FLOWNAV_BACKEND", "auto").strip().lower())
    return _active


def set_backend(name: str) -> str:
    """Force the backend for this process; returns the resolved name."""
    global _active
    _active = _resolve(name.strip().lower())
    return _active
