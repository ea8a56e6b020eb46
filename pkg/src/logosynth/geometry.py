"""Planar transform math: scale/shear/rotation/tilt maps and box propagation.

All maps are 3x3 homogeneous matrices acting on (x, y, 1) column vectors.
Coordinates are continuous: a pixel (i, j) of a raster occupies the unit
square [i, i+1) x [j, j+1) and has its sampling center at (i+0.5, j+0.5).
Angles are degrees throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BackFacingError,
    NonPositiveScaleError,
    SingularMapError,
    SingularShearError,
)

Box = tuple[float, float, float, float]

_W_EPS = 1e-9
_DET_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class PlanarMap:
    """An invertible planar map in homogeneous coordinates.

    ``kind`` is "affine" when the last row is exactly (0, 0, 1), else
    "homography". The matrix is stored normalized so m[2,2] == 1 whenever
    that entry is nonzero.
    """

    m: np.ndarray
    kind: str = field(init=False)

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
        if abs(m[2, 2]) > _DET_EPS:
            m = m / m[2, 2]
        m.setflags(write=False)
        object.__setattr__(self, "m", m)
        if abs(np.linalg.det(m)) <= _DET_EPS:
            raise SingularMapError("planar map is singular")
        affine = m[2, 0] == 0.0 and m[2, 1] == 0.0 and m[2, 2] == 1.0
        object.__setattr__(self, "kind", "affine" if affine else "homography")

    def __matmul__(self, other: "PlanarMap") -> "PlanarMap":
        """Composition: (a @ b) applies b first, then a."""
        return PlanarMap(self.m @ other.m)

    def inverse(self) -> "PlanarMap":
        return PlanarMap(np.linalg.inv(self.m))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map an (n, 2) array of points, raising on back-facing results."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        ones = np.ones((pts.shape[0], 1))
        h = np.hstack([pts, ones]) @ self.m.T
        w = h[:, 2]
        if np.any(w <= _W_EPS):
            raise BackFacingError("point projects behind the camera (w <= 0)")
        return h[:, :2] / w[:, None]


def identity() -> PlanarMap:
    return PlanarMap(np.eye(3))


def make_translation(tx: float, ty: float) -> PlanarMap:
    return PlanarMap(np.array([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]]))


def make_scale(sx: float, sy: float) -> PlanarMap:
    """Axis-aligned scaling about the origin; factors must be positive."""
    if sx <= 0 or sy <= 0:
        raise NonPositiveScaleError(f"scale factors must be > 0, got ({sx}, {sy})")
    return PlanarMap(np.array([[sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, 1.0]]))


def make_shear(kx: float, ky: float) -> PlanarMap:
    """Shear (x, y) -> (x + kx*y, y + ky*x)."""
    if kx * ky == 1.0:
        raise SingularShearError(f"shear ({kx}, {ky}) has zero determinant")
    return PlanarMap(np.array([[1.0, kx, 0.0], [ky, 1.0, 0.0], [0.0, 0.0, 1.0]]))


def make_rotation(theta: float) -> PlanarMap:
    """In-plane rotation about the origin by ``theta`` degrees.

    Positive angles rotate (1, 0) towards (0, 1).
    """
    t = math.radians(theta)
    c, s = math.cos(t), math.sin(t)
    return PlanarMap(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]))


def make_tilt(tilt_x: float, tilt_y: float, focal: float) -> PlanarMap:
    """Out-of-plane rotation of the logo plane, viewed by a pinhole camera.

    The plane sits at depth ``focal`` so that zero tilt is the identity and
    the origin stays fixed (the plane pivots about its center). Rotation is
    about the plane's x axis by ``tilt_x`` degrees, then its y axis by
    ``tilt_y``. The result is a homography; points that end up behind the
    camera raise :class:`BackFacingError` when the map is applied.
    """
    if focal <= 0:
        raise ValueError(f"focal length must be > 0, got {focal}")
    if abs(tilt_x) >= 90 or abs(tilt_y) >= 90:
        raise BackFacingError(
            f"tilt ({tilt_x}, {tilt_y}) turns the plane edge-on or away"
        )
    a, b = math.radians(tilt_x), math.radians(tilt_y)
    ca, sa = math.cos(a), math.sin(a)
    cb, sb = math.cos(b), math.sin(b)
    m = np.array(
        [
            [focal * cb, focal * sa * sb, 0.0],
            [0.0, focal * ca, 0.0],
            [-sb, sa * cb, focal],
        ]
    )
    return PlanarMap(m)


@dataclass(frozen=True)
class TransformSpec:
    """Sampled parameters of one geometric + colour transform.

    ``sx``/``sy`` are plain scale factors here; the synthesis pipeline
    samples them as logo-to-context width ratios and rescales before
    rendering. Identity values: scale 1, shear 0, rotation 0, tilt 0,
    colour_r 1.
    """

    sx: float = 1.0
    sy: float = 1.0
    kx: float = 0.0
    ky: float = 0.0
    theta: float = 0.0
    tilt_x: float = 0.0
    tilt_y: float = 0.0
    focal: float = 1000.0
    colour_r: float = 1.0

    def __post_init__(self):
        if self.sx <= 0 or self.sy <= 0:
            raise NonPositiveScaleError(
                f"scale factors must be > 0, got ({self.sx}, {self.sy})"
            )
        if not 0.0 <= self.theta < 360.0:
            raise ValueError(f"theta must lie in [0, 360), got {self.theta}")
        if not 0.0 <= self.colour_r <= 2.0:
            raise ValueError(f"colour_r must lie in [0, 2], got {self.colour_r}")
        if self.focal <= 0:
            raise ValueError(f"focal length must be > 0, got {self.focal}")
        if abs(self.tilt_x) >= 90 or abs(self.tilt_y) >= 90:
            raise BackFacingError(
                f"tilt ({self.tilt_x}, {self.tilt_y}) exceeds +/-90 degrees"
            )

    @property
    def has_tilt(self) -> bool:
        return self.tilt_x != 0.0 or self.tilt_y != 0.0


def compose(spec: TransformSpec) -> PlanarMap:
    """Single map applying scale, then shear, then rotation, then tilt.

    With zero tilt the result is affine.
    """
    m = make_rotation(spec.theta) @ make_shear(spec.kx, spec.ky) @ make_scale(
        spec.sx, spec.sy
    )
    if spec.has_tilt:
        m = make_tilt(spec.tilt_x, spec.tilt_y, spec.focal) @ m
    return m


def rect_corners(rect: Box) -> np.ndarray:
    """Corner points of (xmin, ymin, xmax, ymax) in TL, TR, BR, BL order."""
    x0, y0, x1, y1 = rect
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=np.float64)


def quad_hull(quad: np.ndarray) -> Box:
    """Tight axis-aligned bounds of a corner quad."""
    q = np.asarray(quad, dtype=np.float64)
    return (
        float(q[:, 0].min()),
        float(q[:, 1].min()),
        float(q[:, 0].max()),
        float(q[:, 1].max()),
    )


def quad_area(quad: np.ndarray) -> float:
    """Shoelace area (absolute) of a corner quad."""
    q = np.asarray(quad, dtype=np.float64)
    x, y = q[:, 0], q[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def transform_quad(pmap: PlanarMap, rect: Box) -> tuple[np.ndarray, Box]:
    """Map a rectangle's corners, returning (quad, axis-aligned hull).

    The rectangle must have positive area; mapped corners must have
    positive homogeneous w (else :class:`BackFacingError`).
    """
    x0, y0, x1, y1 = rect
    if x1 <= x0 or y1 <= y0:
        raise ValueError(f"rectangle {rect} has non-positive area")
    quad = pmap.apply(rect_corners(rect))
    return quad, quad_hull(quad)


def hull_to_pixel_box(hull: Box) -> tuple[int, int, int, int]:
    """Integer pixel box (inclusive corners) of pixels whose centers fall
    inside a continuous hull.

    A center i+0.5 lies inside [x0, x1) iff ceil(x0-0.5) <= i <= ceil(x1-0.5)-1.
    """
    x0, y0, x1, y1 = hull
    return (
        math.ceil(x0 - 0.5),
        math.ceil(y0 - 0.5),
        math.ceil(x1 - 0.5) - 1,
        math.ceil(y1 - 0.5) - 1,
    )


def max_local_scale(pmap: PlanarMap, points: np.ndarray) -> float:
    """Largest singular value of the map's Jacobian over the given points.

    Bounds how far one source pixel can stretch in the output; used to pad
    render canvases so resampling halos are never clipped.
    """
    m = pmap.m
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    worst = 0.0
    for x, y in pts:
        u = m[0, 0] * x + m[0, 1] * y + m[0, 2]
        v = m[1, 0] * x + m[1, 1] * y + m[1, 2]
        w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
        if w <= _W_EPS:
            raise BackFacingError("point projects behind the camera (w <= 0)")
        jac = (
            np.array(
                [
                    [m[0, 0] * w - u * m[2, 0], m[0, 1] * w - u * m[2, 1]],
                    [m[1, 0] * w - v * m[2, 0], m[1, 1] * w - v * m[2, 1]],
                ]
            )
            / (w * w)
        )
        worst = max(worst, float(np.linalg.svd(jac, compute_uv=False)[0]))
    return worst
