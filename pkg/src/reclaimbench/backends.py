"""Backend selection: compiled core when available, pure Python otherwise.

RECLAIM_BACKEND=c forces the extension (raises if missing), =py forces the
fallback, anything else (or unset) auto-detects at import.
"""

from __future__ import annotations

import os

from .descriptors import SessionConfig


def _c_available() -> bool:
    try:
        from . import _ffi

        _ffi.load()
        return True
    except OSError:
        return False


_FORCED = os.environ.get("RECLAIM_BACKEND", "auto").lower()


def default_backend() -> str:
    if _FORCED == "py":
        return "py"
    if _FORCED == "c":
        if not _c_available():
            raise RuntimeError("RECLAIM_BACKEND=c but the compiled core is missing")
        return "c"
    return "c" if _c_available() else "py"


def open_session(cfg: SessionConfig, backend: str | None = None):
    name = backend or default_backend()
    if name == "c":
        from .cbackend import CSession

        return CSession(cfg)
    if name == "py":
        from .pybackend import PySession

        return PySession(cfg)
    raise ValueError(f"unknown backend {name!r}")
