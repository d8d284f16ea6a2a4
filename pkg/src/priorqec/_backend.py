"""Pick the compiled kernels when available, else the numpy fallback.

Set ``PRIORQEC_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import logging
import os
from types import ModuleType

from . import _fallback

log = logging.getLogger(__name__)


def _load_compiled() -> ModuleType | None:
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


def get(name: str) -> ModuleType:
    """Return the kernel module called ``name`` (``"cython"`` or ``"python"``)."""
    if name == "python":
        return _fallback
    if name == "cython":
        mod = _load_compiled()
        if mod is None:
            raise ImportError("compiled kernels are not built; reinstall with Cython available")
        return mod
    raise ValueError(f"unknown backend {name!r}")


def available() -> list[str]:
    return ["cython", "python"] if _load_compiled() is not None else ["python"]


_requested = os.environ.get("PRIORQEC_BACKEND", "").strip().lower()
if _requested == "python":
    kernels, BACKEND = _fallback, "python"
else:
    _mod = _load_compiled()
    if _mod is None:
        if _requested == "cython":
            raise ImportError("PRIORQEC_BACKEND=cython but compiled kernels are not built")
        log.debug("compiled kernels unavailable, using numpy fallback")
        kernels, BACKEND = _fallback, "python"
    else:
        kernels, BACKEND = _mod, "cython"
