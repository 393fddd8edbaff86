"""Selects the stepping backend at import time."""

import os

from . import _pykernel

BACKEND = "python"
dopri5 = _pykernel.dopri5

if os.environ.get("CUBIC3D_PURE") != "1":
    try:
        from ._ckernel import dopri5  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

__all__ = ["BACKEND", "dopri5"]
