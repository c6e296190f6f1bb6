"""Kernel backend selection.

Imports the compiled extension when available, otherwise the numpy
fallback. ``CLAIMCHECK_PURE_PYTHON=1`` forces the fallback (used by the
backend-parity tests and the benchmark).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("CLAIMCHECK_PURE_PYTHON") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

warp_bilinear_rgb = _impl.warp_bilinear_rgb
gaussian_blur = _impl.gaussian_blur
triangle_mean = _impl.triangle_mean
block_mean = _impl.block_mean

__all__ = [
    "BACKEND",
    "warp_bilinear_rgb",
    "gaussian_blur",
    "triangle_mean",
    "block_mean",
]
