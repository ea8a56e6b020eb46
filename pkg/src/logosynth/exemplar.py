"""Loading and indexing of logo exemplars and context images.

Exemplars are RGBA images of a clean logo on a transparent background,
one file per class (``<class_name>.png``). Context images are ordinary
RGB photos with no logo annotations. A Registry holds both, with class
ids assigned 0..N-1 in lexicographic class-name order so identical
directory contents always produce identical registries.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import kernels
from .errors import (
    DecodeError,
    DuplicateClassError,
    EmptyLogoError,
    LogoSynthError,
    NoAlphaError,
)
from .raster import IntBox

CONTEXT_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass(frozen=True, eq=False)
class Exemplar:
    """One logo class: RGBA pixels plus the tight box of its opaque region."""

    class_name: str
    class_id: int
    pixels: np.ndarray
    opaque_bbox: IntBox

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class ContextImage:
    """A logo-free background image; pixels are decoded on demand."""

    path: str
    width: int
    height: int
    tag: str | None = None

    def load_pixels(self) -> np.ndarray:
        try:
            with Image.open(self.path) as im:
                return np.ascontiguousarray(np.asarray(im.convert("RGB")))
        except (OSError, UnidentifiedImageError, ValueError) as exc:
            raise DecodeError(f"{self.path}: {exc}") from exc


@dataclass(frozen=True)
class Registry:
    exemplars: tuple[Exemplar, ...]
    contexts: tuple[ContextImage, ...]

    @property
    def class_names(self) -> list[str]:
        return [e.class_name for e in self.exemplars]

    def exemplar_by_name(self, name: str) -> Exemplar:
        for e in self.exemplars:
            if e.class_name == name:
                return e
        raise KeyError(name)


def load_exemplar(path: str | Path, class_name: str, alpha_threshold: int = 0) -> Exemplar:
    """Decode one exemplar and compute its opaque box.

    The image must carry an alpha channel and at least one pixel above the
    threshold. Pixels are kept uncropped; only the box is recorded.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            if not _has_alpha(im):
                raise NoAlphaError(f"{path}: image has no alpha channel")
            rgba = np.ascontiguousarray(np.asarray(im.convert("RGBA")))
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc
    res = kernels.alpha_bbox(np.ascontiguousarray(rgba[:, :, 3]), int(alpha_threshold))
    if res[0] == 0:
        raise EmptyLogoError(f"{path}: no pixel has alpha > {alpha_threshold}")
    rgba.setflags(write=False)
    return Exemplar(
        class_name=class_name,
        class_id=0,
        pixels=rgba,
        opaque_bbox=(int(res[1]), int(res[2]), int(res[3]), int(res[4])),
    )


def _has_alpha(im: Image.Image) -> bool:
    if "A" in im.getbands():
        return True
    return im.mode == "P" and "transparency" in im.info


def load_context(path: str | Path, root: Path | None = None) -> ContextImage:
    """Validate a context image header and record its dimensions."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            w, h = im.size
            im.verify()
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc
    if w < 1 or h < 1:
        raise DecodeError(f"{path}: degenerate image size {w}x{h}")
    tag = None
    if root is not None:
        rel = path.parent.relative_to(root)
        if rel.parts:
            tag = rel.parts[0]
    return ContextImage(path=str(path), width=w, height=h, tag=tag)


def load_registry(
    exemplar_dir: str | Path,
    context_dir: str | Path | None = None,
    alpha_threshold: int = 0,
    threads: int = 1,
) -> Registry:
    """Scan both directories and build a validated, deterministically
    ordered registry.

    Exemplar class names come from file stems; duplicates anywhere under
    the exemplar directory are an error. Context files may sit in
    subdirectories, whose first level becomes the context tag.
    """
    exemplar_dir = Path(exemplar_dir)
    if not exemplar_dir.is_dir():
        raise LogoSynthError(f"exemplar directory not found: {exemplar_dir}")
    files = sorted(
        p for p in exemplar_dir.rglob("*") if p.is_file() and p.suffix.lower() == ".png"
    )
    if not files:
        raise LogoSynthError(f"no exemplar .png files under {exemplar_dir}")
    seen: dict[str, Path] = {}
    for p in files:
        if p.stem in seen:
            raise DuplicateClassError(
                f"class {p.stem!r} defined by both {seen[p.stem]} and {p}"
            )
        seen[p.stem] = p
    ordered = sorted(seen.items())

    def _load_one(item: tuple[str, Path]) -> Exemplar:
        return load_exemplar(item[1], item[0], alpha_threshold)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            loaded = list(pool.map(_load_one, ordered))
    else:
        loaded = [_load_one(item) for item in ordered]
    exemplars = tuple(
        replace(e, class_id=i) for i, e in enumerate(loaded)
    )

    contexts: tuple[ContextImage, ...] = ()
    if context_dir is not None:
        context_dir = Path(context_dir)
        if not context_dir.is_dir():
            raise LogoSynthError(f"context directory not found: {context_dir}")
        ctx_files = sorted(
            p
            for p in context_dir.rglob("*")
            if p.is_file() and p.suffix.lower() in CONTEXT_SUFFIXES
        )
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                contexts = tuple(
                    pool.map(lambda p: load_context(p, context_dir), ctx_files)
                )
        else:
            contexts = tuple(load_context(p, context_dir) for p in ctx_files)
    return Registry(exemplars=exemplars, contexts=contexts)
