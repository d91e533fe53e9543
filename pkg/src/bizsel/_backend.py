"""Select the compiled kernel or the pure-Python fallback.

The compiled module is optional. Set ``BIZSEL_PURE_PYTHON=1`` to ignore it
even when it was built.
"""

from __future__ import annotations

import os

STATUS_OK = 0
STATUS_CAP = 1
STATUS_ZERO_VARIANCE = 2

try:
    from bizsel import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if os.environ.get("BIZSEL_PURE_PYTHON", "").strip() not in ("", "0"):
    _compiled = None

HAVE_COMPILED = _compiled is not None
BACKENDS = ("auto", "compiled", "python")


def use_compiled(backend: str) -> bool:
    if backend not in BACKENDS:
        raise ValueError(f"backend must be one of {BACKENDS}, got {backend!r}")
    if backend == "python":
        return False
    if backend == "compiled" and not HAVE_COMPILED:
        raise RuntimeError("compiled kernels are not available; reinstall with a C compiler and Cython")
    return HAVE_COMPILED


def kernels():
    return _compiled


def active_backend() -> str:
    return "compiled" if HAVE_COMPILED else "python"
