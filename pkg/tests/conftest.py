import numpy as np
import pytest
from PIL import Image

from logosynth.exemplar import Exemplar


def solid_exemplar(
    w=160, h=120, margin=20, colour=(200, 60, 40), name="solid", class_id=0
) -> Exemplar:
    """Fully opaque rectangle inset by ``margin`` on a transparent field."""
    img = np.zeros((h, w, 4), dtype=np.uint8)
    img[margin : h - margin, margin : w - margin, :3] = colour
    img[margin : h - margin, margin : w - margin, 3] = 255
    return Exemplar(
        class_name=name,
        class_id=class_id,
        pixels=img,
        opaque_bbox=(margin, margin, w - margin - 1, h - margin - 1),
    )


def shaped_exemplar(seed=0, w=180, h=150, name="shaped", class_id=0) -> Exemplar:
    """Random blobby alpha mask with varied colours, alpha in {0, 255}."""
    rng = np.random.default_rng(seed)
    img = np.zeros((h, w, 4), dtype=np.uint8)
    yy, xx = np.mgrid[0:h, 0:w]
    mask = np.zeros((h, w), dtype=bool)
    for _ in range(4):
        cx, cy = rng.uniform(w * 0.25, w * 0.75), rng.uniform(h * 0.25, h * 0.75)
        rx, ry = rng.uniform(w * 0.1, w * 0.2), rng.uniform(h * 0.1, h * 0.2)
        mask |= ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
    img[mask, :3] = rng.integers(1, 256, (int(mask.sum()), 3))
    img[mask, 3] = 255
    xs, ys = np.flatnonzero(mask.any(axis=0)), np.flatnonzero(mask.any(axis=1))
    return Exemplar(
        class_name=name,
        class_id=class_id,
        pixels=img,
        opaque_bbox=(int(xs[0]), int(ys[0]), int(xs[-1]), int(ys[-1])),
    )


def gradient_context(w=256, h=256, seed=0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    gx = np.linspace(0, 255, w, dtype=np.float64)
    gy = np.linspace(0, 255, h, dtype=np.float64)
    r = np.tile(gx, (h, 1))
    g = np.tile(gy[:, None], (1, w))
    b = np.full((h, w), rng.integers(0, 256))
    return np.stack([r, g, b], axis=-1).astype(np.uint8)


def write_exemplar_dir(root, names, seed=0, size=(160, 120)):
    root.mkdir(parents=True, exist_ok=True)
    for i, name in enumerate(names):
        ex = shaped_exemplar(seed=seed + i, w=size[0], h=size[1], name=name)
        Image.fromarray(ex.pixels).save(root / f"{name}.png")
    return root


def write_context_dir(root, n, seed=0, size=(256, 256), fmt="jpg"):
    root.mkdir(parents=True, exist_ok=True)
    for i in range(n):
        ctx = gradient_context(size[0], size[1], seed=seed + i)
        path = root / f"ctx{i:03d}.{fmt}"
        if fmt == "jpg":
            Image.fromarray(ctx).save(path, quality=92)
        else:
            Image.fromarray(ctx).save(path)
    return root


@pytest.fixture
def tiny_dirs(tmp_path):
    """Three shaped exemplars plus four contexts on disk."""
    ex = write_exemplar_dir(tmp_path / "exemplars", ["alpha", "beta", "gamma"])
    ctx = write_context_dir(tmp_path / "contexts", 4)
    return ex, ctx
