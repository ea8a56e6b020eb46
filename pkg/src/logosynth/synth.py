"""Synthetic context-logo image generation.

Each record warps one exemplar (scale, shear, rotate, optional tilt, plus
a channel-scaling colour jitter), pastes it at a random location of a
context image (or a clean black canvas), and derives its ground-truth box
from the rendered alpha. Generation is a pure function of
(registry, config): per-record seeds come from a fixed 64-bit hash of
(master_seed, class_id, index), so output never depends on worker count
or execution order.
"""
from __future__ import annotations

import functools
import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from . import geometry
from .dataset import Annotation, DatasetManifest, ImageInfo, write_annotations, write_manifest_json
from .errors import DoesNotFitError, EmptyLogoError, GenerationFailedError, LogoSynthError
from .exemplar import ContextImage, Exemplar, Registry
from .geometry import PlanarMap, TransformSpec
from .raster import ColourParams, IntBox, apply_colour, composite, crop, tight_bbox, warp_rgba

CONTEXT_MODES = ("scene", "clean_black")
PLACEMENT_POLICIES = ("fully_inside",)

_RETRY_ATTEMPTS = 10
_PNG_COMPRESS_LEVEL = 6
_JPEG_QUALITY = 95

# SplitMix64 constants; the seed derivation below is part of the on-disk
# contract and must never change.
_MASK64 = (1 << 64) - 1
_SEED_INIT = 0x243F6A8885A308D3
_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_MULT1 = 0xBF58476D1CE4E5B9
_SM_MULT2 = 0x94D049BB133111EB


def _splitmix64(x: int) -> int:
    z = (x + _SM_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * _SM_MULT1) & _MASK64
    z = ((z ^ (z >> 27)) * _SM_MULT2) & _MASK64
    return z ^ (z >> 31)


def derive_seed(*parts: int) -> int:
    """Stable 64-bit hash of integer parts.

    Starting from a fixed constant, each part is XOR-folded into the state
    and passed through the SplitMix64 finalizer. Record seeds are
    ``derive_seed(master_seed, class_id, index)``.
    """
    state = _SEED_INIT
    for p in parts:
        state = _splitmix64(state ^ (int(p) & _MASK64))
    return state


@dataclass(frozen=True)
class SynthConfig:
    """Knobs of the generation pipeline; defaults match the standard run.

    ``scale_range`` is the sampled logo-width to context-width ratio. The
    enable flags realize the single-transform ablations: a disabled
    transform holds its identity value in every sampled spec (and the
    colour step is skipped entirely, leaving even pure-black pixels
    untouched).
    """

    images_per_class: int = 100
    context_mode: str = "scene"
    enable_scaling: bool = True
    enable_shearing: bool = True
    enable_rotation: bool = True
    enable_colouring: bool = True
    enable_tilt: bool = False
    scale_range: tuple[float, float] = (0.05, 0.4)
    shear_range: tuple[float, float] = (-0.3, 0.3)
    rotation_range: tuple[float, float] = (0.0, 360.0)
    colour_r_range: tuple[float, float] = (0.0, 2.0)
    tilt_range: tuple[float, float] = (-45.0, 45.0)
    focal: float = 1000.0
    clean_canvas_size: int = 512
    placement_policy: str = "fully_inside"
    master_seed: int = 0
    output_long_side: int | None = None
    interpolation: str = "bilinear"
    alpha_threshold: int = 0
    black_substitute: int = 100
    image_format: str = "png"

    def __post_init__(self):
        if self.images_per_class < 1:
            raise ValueError("images_per_class must be >= 1")
        if self.context_mode not in CONTEXT_MODES:
            raise ValueError(f"unknown context mode {self.context_mode!r}")
        if self.placement_policy not in PLACEMENT_POLICIES:
            raise ValueError(f"unknown placement policy {self.placement_policy!r}")
        _check_range("scale_range", self.scale_range, 0.0, math.inf, open_lo=True)
        _check_range("shear_range", self.shear_range, -math.inf, math.inf)
        _check_range("rotation_range", self.rotation_range, 0.0, 360.0)
        _check_range("colour_r_range", self.colour_r_range, 0.0, 2.0)
        _check_range("tilt_range", self.tilt_range, -90.0, 90.0, open_lo=True, open_hi=True)
        if self.focal <= 0:
            raise ValueError("focal must be > 0")
        if self.clean_canvas_size < 1:
            raise ValueError("clean_canvas_size must be >= 1")
        if self.output_long_side is not None and self.output_long_side < 1:
            raise ValueError("output_long_side must be >= 1")
        if self.interpolation not in ("nearest", "bilinear"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        if not 0 <= self.alpha_threshold <= 255:
            raise ValueError("alpha_threshold must lie in [0, 255]")
        if not 0 <= self.black_substitute <= 255:
            raise ValueError("black_substitute must lie in [0, 255]")
        if self.image_format not in ("png", "jpg"):
            raise ValueError(f"unknown image format {self.image_format!r}")

    def flat(self) -> dict[str, str]:
        """Canonical flat key/value form (keys match the CLI flag names)."""
        return {
            "per-class": str(self.images_per_class),
            "context-mode": self.context_mode,
            "no-scaling": str(not self.enable_scaling).lower(),
            "no-shearing": str(not self.enable_shearing).lower(),
            "no-rotation": str(not self.enable_rotation).lower(),
            "no-colouring": str(not self.enable_colouring).lower(),
            "tilt": str(self.enable_tilt).lower(),
            "scale-range": _fmt_range(self.scale_range),
            "shear-range": _fmt_range(self.shear_range),
            "rotation-range": _fmt_range(self.rotation_range),
            "colour-range": _fmt_range(self.colour_r_range),
            "tilt-range": _fmt_range(self.tilt_range),
            "focal": repr(float(self.focal)),
            "canvas": str(self.clean_canvas_size),
            "placement": self.placement_policy,
            "seed": str(self.master_seed),
            "long-side": "" if self.output_long_side is None else str(self.output_long_side),
            "interp": self.interpolation,
            "alpha-threshold": str(self.alpha_threshold),
            "black-substitute": str(self.black_substitute),
            "format": self.image_format,
        }

    def digest(self) -> str:
        """sha256 over the canonical flat form; stamped into manifests."""
        blob = "\n".join(f"{k}={v}" for k, v in sorted(self.flat().items()))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _fmt_range(r: tuple[float, float]) -> str:
    return f"{r[0]!r},{r[1]!r}"


def _check_range(name, r, lo, hi, open_lo=False, open_hi=False):
    a, b = float(r[0]), float(r[1])
    if a > b:
        raise ValueError(f"{name} is empty: {r}")
    lo_ok = a > lo if open_lo else a >= lo
    hi_ok = b < hi if open_hi else b <= hi
    if not (lo_ok and hi_ok):
        raise ValueError(f"{name} {r} outside documented bounds")


@dataclass(frozen=True, eq=False)
class SynthRecord:
    """One synthesized image with its automatic annotation and provenance."""

    image_id: str
    image: np.ndarray | None
    path: str | None
    class_name: str
    bbox: IntBox
    quad: np.ndarray
    spec: TransformSpec
    context_path: str
    seed: int


def sample_spec(rng_seed, config: SynthConfig) -> TransformSpec:
    """Draw one TransformSpec; disabled transforms take identity values.

    Draw order (fixed): scale ratio, shear kx, shear ky, rotation, tilt_x,
    tilt_y, colour r. Disabled transforms consume no draws.
    ``rng_seed`` may be an integer seed or a live numpy Generator.
    """
    rng = np.random.default_rng(rng_seed)
    ratio = float(rng.uniform(*config.scale_range)) if config.enable_scaling else 1.0
    if config.enable_shearing:
        kx = float(rng.uniform(*config.shear_range))
        ky = float(rng.uniform(*config.shear_range))
    else:
        kx = ky = 0.0
    theta = (
        float(rng.uniform(*config.rotation_range)) % 360.0
        if config.enable_rotation
        else 0.0
    )
    if config.enable_tilt:
        tilt_x = float(rng.uniform(*config.tilt_range))
        tilt_y = float(rng.uniform(*config.tilt_range))
    else:
        tilt_x = tilt_y = 0.0
    r = float(rng.uniform(*config.colour_r_range)) if config.enable_colouring else 1.0
    return TransformSpec(
        sx=ratio,
        sy=ratio,
        kx=kx,
        ky=ky,
        theta=theta,
        tilt_x=tilt_x,
        tilt_y=tilt_y,
        focal=config.focal,
        colour_r=r,
    )


def sample_placement(
    rng_seed,
    context_dims: tuple[int, int],
    logo_hull_dims: tuple[int, int],
    policy: str = "fully_inside",
) -> tuple[int, int]:
    """Uniform top-left position keeping the logo box fully inside.

    Draw order: x, then y. Raises DoesNotFitError when the box exceeds the
    context in either dimension.
    """
    if policy not in PLACEMENT_POLICIES:
        raise ValueError(f"unknown placement policy {policy!r}")
    cw, chh = int(context_dims[0]), int(context_dims[1])
    bw, bh = int(logo_hull_dims[0]), int(logo_hull_dims[1])
    if bw > cw or bh > chh:
        raise DoesNotFitError(f"logo box {bw}x{bh} exceeds context {cw}x{chh}")
    rng = np.random.default_rng(rng_seed)
    x = int(rng.integers(0, cw - bw + 1))
    y = int(rng.integers(0, chh - bh + 1))
    return x, y


def render_map(
    spec: TransformSpec,
    opaque_bbox: IntBox,
    context_width: int,
    ratio_scale: bool,
) -> tuple[PlanarMap, tuple[float, float, float, float]]:
    """Pixel-space map for a spec, centered on the exemplar's opaque box.

    Returns (map, area) where ``area`` is the opaque box as a continuous
    rectangle (xmin, ymin, xmax+1, ymax+1) in exemplar coordinates. With
    ``ratio_scale`` the spec's scale field is a logo-width to context-width
    ratio and is converted to a resampling factor here; otherwise it is
    used verbatim.
    """
    x0, y0 = float(opaque_bbox[0]), float(opaque_bbox[1])
    x1, y1 = opaque_bbox[2] + 1.0, opaque_bbox[3] + 1.0
    if ratio_scale:
        f = spec.sx * context_width / (x1 - x0)
        spec = replace(spec, sx=f, sy=f * (spec.sy / spec.sx))
    m = geometry.compose(spec) @ geometry.make_translation(
        -(x0 + x1) / 2.0, -(y0 + y1) / 2.0
    )
    return m, (x0, y0, x1, y1)


def _render_logo(
    exemplar_pixels: np.ndarray,
    opaque_bbox: IntBox,
    spec: TransformSpec,
    context_width: int,
    config: SynthConfig,
) -> tuple[np.ndarray, IntBox, np.ndarray]:
    """Warp the (already colour-jittered) exemplar onto a tight canvas.

    Returns (canvas, tight box in canvas coords, corner quad in canvas
    coords). The canvas is padded by the worst-case resampling halo so no
    visible pixel is ever clipped.
    """
    m, area = render_map(spec, opaque_bbox, context_width, config.enable_scaling)
    quad = m.apply(geometry.rect_corners(area))
    hx0, hy0, hx1, hy1 = geometry.quad_hull(quad)
    pad = math.ceil(0.5 * geometry.max_local_scale(m, geometry.rect_corners(area))) + 1
    out_w = math.ceil(hx1 - hx0) + 2 * pad
    out_h = math.ceil(hy1 - hy0) + 2 * pad
    shift = (pad - hx0, pad - hy0)
    m_render = geometry.make_translation(*shift) @ m
    canvas = warp_rgba(exemplar_pixels, m_render, out_w, out_h, config.interpolation)
    tb = tight_bbox(canvas, config.alpha_threshold)
    return canvas, tb, quad + np.array(shift)


@functools.lru_cache(maxsize=64)
def _context_pixels(path: str, long_side: int | None) -> np.ndarray:
    with Image.open(path) as im:
        rgb = im.convert("RGB")
        if long_side is not None and max(rgb.size) != long_side:
            w, h = rgb.size
            if w >= h:
                rgb = rgb.resize((long_side, max(1, round(h * long_side / w))), Image.BILINEAR)
            else:
                rgb = rgb.resize((max(1, round(w * long_side / h)), long_side), Image.BILINEAR)
        arr = np.ascontiguousarray(np.asarray(rgb))
    arr.setflags(write=False)
    return arr


def generate_record(
    exemplar: Exemplar,
    context: ContextImage | None,
    config: SynthConfig,
    per_image_seed: int,
    rng: np.random.Generator | None = None,
    image_id: str | None = None,
) -> SynthRecord:
    """Run the full pipeline for one image.

    Spec sampling, warping, placement, and compositing all draw from one
    stream seeded by ``per_image_seed`` (or continue ``rng`` when given).
    A placement that cannot fit triggers a fresh scale draw, up to 10
    attempts. ``context=None`` selects the clean black canvas.
    """
    if rng is None:
        rng = np.random.default_rng(per_image_seed)
    if image_id is None:
        image_id = f"{exemplar.class_name}_{per_image_seed:016x}"

    spec = sample_spec(rng, config)
    if config.enable_colouring:
        coloured = apply_colour(
            exemplar.pixels, ColourParams(spec.colour_r, config.black_substitute)
        )
    else:
        coloured = exemplar.pixels

    if context is None:
        size = config.clean_canvas_size
        ctx_rgb = np.zeros((size, size, 3), dtype=np.uint8)
        context_path = "clean"
    else:
        ctx_rgb = _context_pixels(context.path, config.output_long_side)
        context_path = context.path
    ctx_h, ctx_w = ctx_rgb.shape[:2]

    for attempt in range(_RETRY_ATTEMPTS):
        try:
            canvas, tb, quad = _render_logo(
                coloured, exemplar.opaque_bbox, spec, ctx_w, config
            )
            bw, bh = tb[2] - tb[0] + 1, tb[3] - tb[1] + 1
            px, py = sample_placement(
                rng, (ctx_w, ctx_h), (bw, bh), config.placement_policy
            )
        except (DoesNotFitError, EmptyLogoError):
            if config.enable_scaling:
                ratio = float(rng.uniform(*config.scale_range))
                spec = replace(spec, sx=ratio, sy=ratio)
            continue
        logo = crop(canvas, tb)
        image, placed = composite(ctx_rgb, logo, (px, py), config.alpha_threshold)
        return SynthRecord(
            image_id=image_id,
            image=image,
            path=None,
            class_name=exemplar.class_name,
            bbox=placed,
            quad=quad + np.array([px - tb[0], py - tb[1]], dtype=np.float64),
            spec=spec,
            context_path=context_path,
            seed=int(per_image_seed),
        )
    raise GenerationFailedError(exemplar.class_name, int(per_image_seed), _RETRY_ATTEMPTS)


def _save_record_image(record: SynthRecord, out_dir: Path, fmt: str) -> tuple[str, int, int]:
    rel = Path("images") / record.class_name / f"{record.image_id}.{fmt}"
    path = out_dir / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    im = Image.fromarray(record.image)
    if fmt == "png":
        im.save(path, format="PNG", compress_level=_PNG_COMPRESS_LEVEL)
    else:
        im.save(path, format="JPEG", quality=_JPEG_QUALITY)
    h, w = record.image.shape[:2]
    return str(rel), w, h


def generate_dataset(
    registry: Registry,
    config: SynthConfig,
    out_dir: str | Path,
    threads: int = 1,
    dataset_name: str = "synthetic",
    class_names: list[str] | None = None,
) -> DatasetManifest:
    """Generate ``images_per_class`` records for every class and write the
    dataset (images/, annotations.jsonl, manifest.json) under ``out_dir``.

    The result is a pure function of (registry, config): records are keyed
    by (class_id, index) and their seeds derived from the master seed, so
    any worker count produces byte-identical output.
    """
    exemplars = list(registry.exemplars)
    if class_names is not None:
        wanted = set(class_names)
        missing = wanted - {e.class_name for e in exemplars}
        if missing:
            raise LogoSynthError(f"unknown classes requested: {sorted(missing)}")
        exemplars = [e for e in exemplars if e.class_name in wanted]
    if not exemplars:
        raise LogoSynthError("registry has no exemplar classes")
    if config.context_mode == "scene" and not registry.contexts:
        raise LogoSynthError("scene context mode needs at least one context image")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    contexts = registry.contexts
    fmt = config.image_format

    def _one(task: tuple[int, Exemplar, int]):
        order, ex, idx = task
        rec_seed = derive_seed(config.master_seed, ex.class_id, idx)
        rng = np.random.default_rng(rec_seed)
        if config.context_mode == "scene":
            ctx = contexts[int(rng.integers(0, len(contexts)))]
        else:
            ctx = None
        record = generate_record(
            ex, ctx, config, rec_seed, rng=rng, image_id=f"{ex.class_name}_{idx:05d}"
        )
        rel, w, h = _save_record_image(record, out_dir, fmt)
        return (
            order,
            ImageInfo(image_id=record.image_id, path=rel, width=w, height=h),
            Annotation(
                image_id=record.image_id,
                class_name=record.class_name,
                bbox=record.bbox,
                source="synthetic",
            ),
        )

    tasks = [
        (ei * config.images_per_class + idx, ex, idx)
        for ei, ex in enumerate(exemplars)
        for idx in range(config.images_per_class)
    ]
    failures: list[str] = []
    results = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_one, t) for t in tasks]
            for fut in futures:
                try:
                    results.append(fut.result())
                except LogoSynthError as exc:
                    failures.append(str(exc))
    else:
        for t in tasks:
            try:
                results.append(_one(t))
            except LogoSynthError as exc:
                failures.append(str(exc))
    if failures:
        preview = "; ".join(failures[:3])
        raise LogoSynthError(
            f"{len(failures)} record(s) failed, dataset incomplete: {preview}"
        )
    results.sort(key=lambda r: r[0])

    manifest = DatasetManifest(
        name=dataset_name,
        classes=sorted(e.class_name for e in exemplars),
        images=[r[1] for r in results],
        annotations=[r[2] for r in results],
        seed=config.master_seed,
        config_digest=config.digest(),
    )
    write_annotations(manifest, out_dir / "annotations.jsonl")
    write_manifest_json(manifest, out_dir / "manifest.json")
    return manifest


def render_preview(
    registry: Registry,
    config: SynthConfig,
    n: int,
    box_colour: tuple[int, int, int] = (0, 255, 0),
) -> np.ndarray:
    """Contact sheet of ``n`` sampled records with ground-truth boxes drawn.

    Classes are cycled in registry order; record i uses the seed derived
    from (master_seed, class_id, i), so a fixed config yields a fixed sheet.
    """
    if n < 1:
        raise ValueError("preview needs n >= 1 samples")
    exemplars = registry.exemplars
    if not exemplars:
        raise LogoSynthError("registry has no exemplar classes")
    if config.context_mode == "scene" and not registry.contexts:
        raise LogoSynthError("scene context mode needs at least one context image")
    tiles = []
    for i in range(n):
        ex = exemplars[i % len(exemplars)]
        rec_seed = derive_seed(config.master_seed, ex.class_id, i)
        rng = np.random.default_rng(rec_seed)
        ctx = (
            registry.contexts[int(rng.integers(0, len(registry.contexts)))]
            if config.context_mode == "scene"
            else None
        )
        rec = generate_record(ex, ctx, config, rec_seed, rng=rng)
        tile = rec.image.copy()
        _draw_box(tile, rec.bbox, box_colour)
        tiles.append(tile)
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    cell_h = max(t.shape[0] for t in tiles)
    cell_w = max(t.shape[1] for t in tiles)
    sheet = np.zeros((rows * cell_h, cols * cell_w, 3), dtype=np.uint8)
    for i, tile in enumerate(tiles):
        r, c = divmod(i, cols)
        sheet[r * cell_h : r * cell_h + tile.shape[0], c * cell_w : c * cell_w + tile.shape[1]] = tile
    return sheet


def _draw_box(img: np.ndarray, box: IntBox, colour: tuple[int, int, int], width: int = 2):
    x0, y0, x1, y1 = box
    h, w = img.shape[:2]
    for k in range(width):
        ya, yb = min(y0 + k, h - 1), max(y1 - k, 0)
        xa, xb = min(x0 + k, w - 1), max(x1 - k, 0)
        img[ya, x0 : x1 + 1] = colour
        img[yb, x0 : x1 + 1] = colour
        img[y0 : y1 + 1, xa] = colour
        img[y0 : y1 + 1, xb] = colour
