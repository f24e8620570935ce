"""Selects the compiled kernels when the extension is importable.

Set ``MECRELAY_BACKEND=python`` to force the pure-Python paths.
"""
from __future__ import annotations

import contextlib
import os

try:
    from . import _core as _compiled
except ImportError:  # extension not built
    _compiled = None

_state = {"name": "compiled" if _compiled is not None else "python"}
if os.environ.get("MECRELAY_BACKEND", "").lower() == "python":
    _state["name"] = "python"


def compiled_available() -> bool:
    return _compiled is not None


def active() -> str:
    return _state["name"]


def core():
    """The compiled module, or ``None`` when the Python path is active."""
    return _compiled if _state["name"] == "compiled" else None


def set_backend(name: str) -> None:
    if name not in ("compiled", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "compiled" and _compiled is None:
        raise RuntimeError("compiled extension mecrelay._core is not built")
    _state["name"] = name


@contextlib.contextmanager
def using(name: str):
    prev = _state["name"]
    set_backend(name)
    try:
        yield
    finally:
        _state["name"] = prev
