"""Pixel operations on 8-bit rasters.

Rasters are numpy uint8 arrays: RGBA images have shape (h, w, 4), RGB
context images (h, w, 3). Boxes are (xmin, ymin, xmax, ymax) tuples with
inclusive integer corners, so a box has width xmax - xmin + 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import EmptyLogoError, OutOfBoundsError
from .geometry import PlanarMap

IntBox = tuple[int, int, int, int]

INTERPOLATIONS = ("nearest", "bilinear")


@dataclass(frozen=True)
class ColourParams:
    """Channel scaling factor plus the substitute used for pure-black pixels."""

    r: float
    black_substitute: int = 100

    def __post_init__(self):
        if not 0.0 <= self.r <= 2.0:
            raise ValueError(f"colour factor must lie in [0, 2], got {self.r}")
        if not 0 <= self.black_substitute <= 255:
            raise ValueError(
                f"black substitute must lie in [0, 255], got {self.black_substitute}"
            )


def as_rgba(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 4 or arr.dtype != np.uint8:
        raise ValueError(f"expected uint8 (h, w, 4) raster, got {arr.dtype} {arr.shape}")
    return np.ascontiguousarray(arr)


def as_rgb(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ValueError(f"expected uint8 (h, w, 3) raster, got {arr.dtype} {arr.shape}")
    return np.ascontiguousarray(arr)


def apply_colour(img: np.ndarray, params: ColourParams) -> np.ndarray:
    """Scale every RGB channel of visible pixels by ``params.r``.

    Pure-black visible pixels (R=G=B=0) are first lifted to the black
    substitute so the multiplicative transform can act on them. Results are
    rounded half-up and clamped to [0, 255]; alpha and fully transparent
    pixels are untouched.
    """
    return kernels.colour_transform(as_rgba(img), float(params.r), int(params.black_substitute))


def warp_rgba(
    src: np.ndarray,
    pmap: PlanarMap,
    out_w: int,
    out_h: int,
    interp: str = "bilinear",
) -> np.ndarray:
    """Resample ``src`` under ``pmap`` into an (out_h, out_w, 4) raster.

    Each output pixel center is pulled back through the inverse map;
    samples outside the source are fully transparent. Bilinear sampling
    interpolates alpha-premultiplied channels to avoid halo artifacts.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output dims must be >= 1, got {out_w}x{out_h}")
    if interp not in INTERPOLATIONS:
        raise ValueError(f"unknown interpolation {interp!r}")
    inv = np.ascontiguousarray(pmap.inverse().m)
    src = as_rgba(src)
    if interp == "nearest":
        return kernels.warp_nearest(src, inv, int(out_w), int(out_h))
    return kernels.warp_bilinear(src, inv, int(out_w), int(out_h))


def tight_bbox(img: np.ndarray, alpha_threshold: int = 0) -> IntBox:
    """Tight box over pixels with alpha > threshold; EmptyLogoError if none."""
    rgba = as_rgba(img)
    res = kernels.alpha_bbox(np.ascontiguousarray(rgba[:, :, 3]), int(alpha_threshold))
    if res[0] == 0:
        raise EmptyLogoError(f"no pixel has alpha > {alpha_threshold}")
    return (int(res[1]), int(res[2]), int(res[3]), int(res[4]))


def crop(img: np.ndarray, box: IntBox) -> np.ndarray:
    x0, y0, x1, y1 = box
    return np.ascontiguousarray(img[y0 : y1 + 1, x0 : x1 + 1])


def composite(
    context: np.ndarray,
    logo: np.ndarray,
    top_left: tuple[int, int],
    alpha_threshold: int = 0,
) -> tuple[np.ndarray, IntBox]:
    """Source-over blend of ``logo`` onto ``context`` at ``top_left``.

    ``top_left`` positions the logo raster's origin in context coordinates.
    Returns the blended image and the placed annotation box (the logo's
    tight alpha box translated by ``top_left``), which must lie fully
    inside the context.
    """
    ctx = as_rgb(context)
    rgba = as_rgba(logo)
    ox, oy = int(top_left[0]), int(top_left[1])
    tb = tight_bbox(rgba, alpha_threshold)
    placed = (tb[0] + ox, tb[1] + oy, tb[2] + ox, tb[3] + oy)
    h, w = ctx.shape[:2]
    if placed[0] < 0 or placed[1] < 0 or placed[2] >= w or placed[3] >= h:
        raise OutOfBoundsError(
            f"placed box {placed} exceeds context bounds {w}x{h}"
        )
    return kernels.composite_over(ctx, rgba, ox, oy), placed
