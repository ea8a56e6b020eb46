"""Pixel-kernel backend selection.

The hot loops (warping, blending, colour transform, alpha boxes) exist in
two interchangeable implementations:

* ``jit``   -- numba ``@njit`` loops (default when numba imports cleanly)
* ``plain`` -- vectorized numpy fallback

Set ``LOGOSYNTH_BACKEND=numpy`` (or ``numba``) to force one. Both produce
byte-identical output, so the flag only affects speed; see
``benchmarks/bench_kernels.py`` for a comparison.
"""
from __future__ import annotations

import os

from . import plain

_ENV_VAR = "LOGOSYNTH_BACKEND"


def _select():
    choice = os.environ.get(_ENV_VAR, "").strip().lower()
    if choice in ("numpy", "plain"):
        return plain, "numpy"
    try:
        from . import jit
    except ImportError:
        if choice in ("numba", "jit"):
            raise
        return plain, "numpy"
    return jit, "numba"


_impl, BACKEND = _select()

colour_transform = _impl.colour_transform
warp_nearest = _impl.warp_nearest
warp_bilinear = _impl.warp_bilinear
alpha_bbox = _impl.alpha_bbox
composite_over = _impl.composite_over

__all__ = [
    "BACKEND",
    "alpha_bbox",
    "colour_transform",
    "composite_over",
    "plain",
    "warp_bilinear",
    "warp_nearest",
]
