"""Both kernel backends must produce byte-identical results."""
import os
import subprocess
import sys

import numpy as np
import pytest

from logosynth import geometry as g
from logosynth.kernels import jit, plain


def random_rgba(rng, h, w, sparse=False):
    img = rng.integers(0, 256, (h, w, 4), dtype=np.uint8)
    if sparse:
        img[:, :, 3] = np.where(rng.random((h, w)) < 0.7, 0, img[:, :, 3])
    return img


def random_maps(rng, n):
    for _ in range(n):
        spec = g.TransformSpec(
            sx=rng.uniform(0.2, 3.0),
            sy=rng.uniform(0.2, 3.0),
            kx=rng.uniform(-0.4, 0.4),
            ky=rng.uniform(-0.4, 0.4),
            theta=rng.uniform(0, 360) % 360,
            tilt_x=rng.uniform(-35, 35),
            tilt_y=rng.uniform(-35, 35),
            focal=600.0,
        )
        yield np.ascontiguousarray(g.compose(spec).inverse().m)


@pytest.mark.parametrize("warp", ["warp_nearest", "warp_bilinear"])
def test_warps_identical(warp):
    rng = np.random.default_rng(101)
    for i, inv in enumerate(random_maps(rng, 25)):
        src = random_rgba(rng, int(rng.integers(3, 120)), int(rng.integers(3, 120)), sparse=i % 2)
        out_w, out_h = int(rng.integers(1, 160)), int(rng.integers(1, 160))
        a = getattr(plain, warp)(src, inv, out_w, out_h)
        b = getattr(jit, warp)(src, inv, out_w, out_h)
        assert np.array_equal(a, b)


def test_colour_identical():
    rng = np.random.default_rng(7)
    for _ in range(50):
        src = random_rgba(rng, 31, 43, sparse=True)
        src[:5, :5] = (0, 0, 0, 255)  # force pure-black visible pixels
        r = float(rng.uniform(0, 2))
        assert np.array_equal(
            plain.colour_transform(src, r, 100), jit.colour_transform(src, r, 100)
        )


def test_composite_identical():
    rng = np.random.default_rng(13)
    for _ in range(50):
        ctx = rng.integers(0, 256, (64, 80, 3), dtype=np.uint8)
        logo = random_rgba(rng, int(rng.integers(1, 90)), int(rng.integers(1, 90)), sparse=True)
        ox, oy = int(rng.integers(-30, 90)), int(rng.integers(-30, 70))
        assert np.array_equal(
            plain.composite_over(ctx, logo, ox, oy), jit.composite_over(ctx, logo, ox, oy)
        )


def test_alpha_bbox_identical():
    rng = np.random.default_rng(17)
    for _ in range(100):
        alpha = rng.integers(0, 256, (int(rng.integers(1, 40)), int(rng.integers(1, 40))), dtype=np.uint8)
        thr = int(rng.integers(0, 256))
        assert np.array_equal(plain.alpha_bbox(alpha, thr), jit.alpha_bbox(alpha, thr))


def test_env_flag_selects_numpy_backend():
    code = "from logosynth import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, LOGOSYNTH_BACKEND="numpy")
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
    )
    assert out.stdout.strip() == "numpy"


def test_default_backend_is_numba():
    env = {k: v for k, v in os.environ.items() if k != "LOGOSYNTH_BACKEND"}
    out = subprocess.run(
        [sys.executable, "-c", "from logosynth import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numba"
