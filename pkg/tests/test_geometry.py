import math

import numpy as np
import pytest

from logosynth import geometry as g
from logosynth.errors import (
    BackFacingError,
    NonPositiveScaleError,
    SingularMapError,
    SingularShearError,
)


def random_spec(rng, tilt=False):
    return g.TransformSpec(
        sx=rng.uniform(0.2, 3.0),
        sy=rng.uniform(0.2, 3.0),
        kx=rng.uniform(-0.3, 0.3),
        ky=rng.uniform(-0.3, 0.3),
        theta=rng.uniform(0.0, 360.0) % 360.0,
        tilt_x=rng.uniform(-30, 30) if tilt else 0.0,
        tilt_y=rng.uniform(-30, 30) if tilt else 0.0,
        focal=500.0,
        colour_r=rng.uniform(0, 2),
    )


class TestScale:
    def test_identity(self):
        assert np.allclose(g.make_scale(1, 1).m, np.eye(3))

    def test_doubling_rect(self):
        _, hull = g.transform_quad(g.make_scale(2, 2), (0, 0, 10, 10))
        assert hull == (0, 0, 20, 20)

    def test_degenerate(self):
        with pytest.raises(NonPositiveScaleError):
            g.make_scale(0, 1)
        with pytest.raises(NonPositiveScaleError):
            g.make_scale(1, -2)


class TestShear:
    def test_identity(self):
        assert np.allclose(g.make_shear(0, 0).m, np.eye(3))

    def test_forced_point(self):
        assert np.allclose(g.make_shear(0.5, 0).apply([[0, 2]]), [[1, 2]])

    def test_singular(self):
        with pytest.raises(SingularShearError):
            g.make_shear(1, 1)
        with pytest.raises(SingularShearError):
            g.make_shear(2, 0.5)


class TestRotation:
    def test_identity(self):
        assert np.allclose(g.make_rotation(0).m, np.eye(3))

    def test_quarter_turn(self):
        assert np.allclose(g.make_rotation(90).apply([[1, 0]]), [[0, 1]], atol=1e-12)

    def test_periodicity(self):
        assert np.allclose(g.make_rotation(360).m, np.eye(3), atol=1e-9)


def pinhole_oracle(points, tilt_x, tilt_y, focal):
    """Brute-force projection: rotate plane points in 3D, view at depth f."""
    ax, ay = math.radians(tilt_x), math.radians(tilt_y)
    rx = np.array(
        [[1, 0, 0], [0, math.cos(ax), -math.sin(ax)], [0, math.sin(ax), math.cos(ax)]]
    )
    ry = np.array(
        [[math.cos(ay), 0, math.sin(ay)], [0, 1, 0], [-math.sin(ay), 0, math.cos(ay)]]
    )
    out = []
    for x, y in points:
        px, py, pz = ry @ rx @ np.array([x, y, 0.0])
        z = pz + focal
        assert z > 0
        out.append((focal * px / z, focal * py / z))
    return np.array(out)


class TestTilt:
    def test_zero_is_identity(self):
        assert np.allclose(g.make_tilt(0, 0, 500).m, np.eye(3))

    def test_centered_square_matches_projection_oracle(self):
        square = np.array([[-50, -50], [50, -50], [50, 50], [-50, 50]], dtype=float)
        got = g.make_tilt(30, 0, 500).apply(square)
        expected = pinhole_oracle(square, 30, 0, 500)
        assert np.allclose(got, expected, atol=1e-9)
        # symmetric trapezoid about the x axis
        assert got[0, 0] == pytest.approx(-got[1, 0])
        assert got[3, 0] == pytest.approx(-got[2, 0])
        assert got[0, 1] == pytest.approx(got[1, 1])

    @pytest.mark.parametrize("tx,ty", [(25, 0), (0, -40), (18, -22)])
    def test_random_tilts_match_oracle(self, tx, ty):
        pts = np.array([[-80, 33], [12, -71], [64, 58], [0, 0]], dtype=float)
        assert np.allclose(
            g.make_tilt(tx, ty, 800).apply(pts), pinhole_oracle(pts, tx, ty, 800), atol=1e-9
        )

    def test_grazing_square_back_faces(self):
        pmap = g.make_tilt(89.9, 0, 500)
        with pytest.raises(BackFacingError):
            g.transform_quad(pmap, (-100000, -100000, 100000, 100000))

    def test_construction_limits(self):
        with pytest.raises(BackFacingError):
            g.make_tilt(90, 0, 500)
        with pytest.raises(ValueError):
            g.make_tilt(10, 0, 0)

    def test_origin_fixed(self):
        assert np.allclose(g.make_tilt(35, -20, 700).apply([[0, 0]]), [[0, 0]])


class TestCompose:
    def test_all_identity(self):
        assert np.allclose(g.compose(g.TransformSpec()).m, np.eye(3))

    def test_scale_then_rotate(self):
        spec = g.TransformSpec(sx=2, sy=2, theta=90.0)
        assert np.allclose(g.compose(spec).apply([[1, 0]]), [[0, 2]], atol=1e-12)

    def test_matches_sequential_application(self):
        rng = np.random.default_rng(11)
        pts = rng.uniform(-100, 100, (20, 2))
        for _ in range(50):
            spec = random_spec(rng, tilt=True)
            stepwise = g.make_scale(spec.sx, spec.sy).apply(pts)
            stepwise = g.make_shear(spec.kx, spec.ky).apply(stepwise)
            stepwise = g.make_rotation(spec.theta).apply(stepwise)
            stepwise = g.make_tilt(spec.tilt_x, spec.tilt_y, spec.focal).apply(stepwise)
            assert np.allclose(g.compose(spec).apply(pts), stepwise, atol=1e-9)

    def test_affine_closure(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            assert g.compose(random_spec(rng, tilt=False)).kind == "affine"

    def test_tilt_gives_homography(self):
        assert g.compose(g.TransformSpec(tilt_x=10.0)).kind == "homography"


class TestTransformQuad:
    def test_identity(self):
        quad, hull = g.transform_quad(g.identity(), (0, 0, 10, 20))
        assert hull == (0, 0, 10, 20)
        assert np.allclose(quad, [[0, 0], [10, 0], [10, 20], [0, 20]])

    def test_rot90(self):
        _, hull = g.transform_quad(g.make_rotation(90), (0, 0, 10, 20))
        assert np.allclose(hull, (-20, 0, 0, 10), atol=1e-12)

    def test_rot45_unit_square(self):
        _, hull = g.transform_quad(g.make_rotation(45), (0, 0, 1, 1))
        assert hull[2] - hull[0] == pytest.approx(math.sqrt(2), abs=1e-9)
        assert hull[3] - hull[1] == pytest.approx(math.sqrt(2), abs=1e-9)

    def test_rejects_empty_rect(self):
        with pytest.raises(ValueError):
            g.transform_quad(g.identity(), (5, 5, 5, 9))

    def test_hull_bounds_random(self):
        # every mapped corner inside the hull, every hull edge touched
        rng = np.random.default_rng(3)
        for _ in range(10_000):
            spec = random_spec(rng)
            x0, y0 = rng.uniform(-50, 50, 2)
            w, h = rng.uniform(0.1, 80, 2)
            quad, hull = g.transform_quad(g.compose(spec), (x0, y0, x0 + w, y0 + h))
            eps = 1e-9
            assert (quad[:, 0] >= hull[0] - eps).all() and (quad[:, 0] <= hull[2] + eps).all()
            assert (quad[:, 1] >= hull[1] - eps).all() and (quad[:, 1] <= hull[3] + eps).all()
            for edge, coord, side in (
                (hull[0], 0, "min"), (hull[2], 0, "max"),
                (hull[1], 1, "min"), (hull[3], 1, "max"),
            ):
                assert np.min(np.abs(quad[:, coord] - edge)) <= eps


class TestPlanarMap:
    def test_singular_rejected(self):
        with pytest.raises(SingularMapError):
            g.PlanarMap(np.array([[1, 0, 0], [2, 0, 0], [0, 0, 1.0]]))

    def test_normalized_last_entry(self):
        m = g.PlanarMap(np.array([[2, 0, 0], [0, 2, 0], [0, 0, 2.0]]))
        assert m.m[2, 2] == 1.0
        assert m.kind == "affine"

    def test_composition_associative(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            a, b, c = (g.compose(random_spec(rng, tilt=True)) for _ in range(3))
            left = ((a @ b) @ c).m
            right = (a @ (b @ c)).m
            assert np.allclose(left / left[2, 2], right / right[2, 2], atol=1e-9)

    def test_inverse_round_trip(self):
        rng = np.random.default_rng(21)
        pts = rng.uniform(0, 4096, (200, 2))
        for _ in range(100):
            m = g.compose(random_spec(rng, tilt=False))
            assert np.allclose(m.inverse().apply(m.apply(pts)), pts, atol=1e-6)

    def test_back_facing_apply(self):
        m = g.make_tilt(60, 0, 100)
        with pytest.raises(BackFacingError):
            m.apply([[0, -1e6]])


class TestSpecValidation:
    def test_rejects_bad_theta(self):
        with pytest.raises(ValueError):
            g.TransformSpec(theta=360.0)

    def test_rejects_bad_colour(self):
        with pytest.raises(ValueError):
            g.TransformSpec(colour_r=2.5)

    def test_rejects_bad_scale(self):
        with pytest.raises(NonPositiveScaleError):
            g.TransformSpec(sx=0.0)


class TestPixelBox:
    def test_identity_area(self):
        # the continuous area of an inclusive box maps back to itself
        assert g.hull_to_pixel_box((3.0, 4.0, 11.0, 9.0)) == (3, 4, 10, 8)

    def test_half_open_boundaries(self):
        assert g.hull_to_pixel_box((0.5, 0.5, 2.5, 2.5)) == (0, 0, 1, 1)

    def test_max_local_scale_affine(self):
        m = g.make_scale(3, 0.5)
        corners = g.rect_corners((0, 0, 10, 10))
        assert g.max_local_scale(m, corners) == pytest.approx(3.0)
