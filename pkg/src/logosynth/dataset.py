"""Dataset manifests: annotation IO, train/test splitting, training plans.

Wire format for annotations is JSON Lines: one header object carrying the
manifest metadata (name, classes, images, seed, config digest), then one
annotation object per line. All fields are written in a fixed key order
with integer pixel coordinates (inclusive corners), so writing the same
manifest twice produces identical bytes.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    InsufficientImagesError,
    MissingManifestError,
    SchemaError,
    UnknownClassError,
)
from .raster import IntBox

SCHEMA_VERSION = 1

ANNOTATION_SOURCES = ("synthetic", "real")

PLAN_NAMES = (
    "RealImg",
    "SynImg-xCls",
    "SynImg-463Cls",
    "SynImg-xCls+RealImg",
    "SynImg-463Cls+RealImg",
    "Fusion",
)

STAGED_PLANS = ("SynImg-xCls+RealImg", "SynImg-463Cls+RealImg")
SYNTH_ONLY_PLANS = ("SynImg-xCls", "SynImg-463Cls")


@dataclass(frozen=True)
class ImageInfo:
    image_id: str
    path: str
    width: int
    height: int


@dataclass(frozen=True)
class Annotation:
    """One labelled box; corners are inclusive pixel indices."""

    image_id: str
    class_name: str
    bbox: IntBox
    source: str = "real"
    difficult: bool = False

    def __post_init__(self):
        x0, y0, x1, y1 = self.bbox
        if x1 < x0 or y1 < y0:
            raise SchemaError(f"malformed bbox {self.bbox} for image {self.image_id!r}")
        if self.source not in ANNOTATION_SOURCES:
            raise SchemaError(f"unknown annotation source {self.source!r}")


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    classes: list[str]
    images: list[ImageInfo]
    annotations: list[Annotation]
    seed: int = 0
    config_digest: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self):
        if list(self.classes) != sorted(self.classes):
            raise SchemaError("class list must be sorted")
        if len(set(self.classes)) != len(self.classes):
            raise SchemaError("class list has duplicates")
        ids = [im.image_id for im in self.images]
        if len(set(ids)) != len(ids):
            raise SchemaError("image ids are not unique")
        known = set(ids)
        class_set = set(self.classes)
        for ann in self.annotations:
            if ann.image_id not in known:
                raise SchemaError(
                    f"annotation references unknown image {ann.image_id!r}"
                )
            if ann.class_name not in class_set:
                raise UnknownClassError(
                    f"annotation class {ann.class_name!r} not in manifest class list"
                )

    def annotations_by_image(self) -> dict[str, list[Annotation]]:
        out: dict[str, list[Annotation]] = {im.image_id: [] for im in self.images}
        for ann in self.annotations:
            out[ann.image_id].append(ann)
        return out


def _dump(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))


def _header_dict(m: DatasetManifest) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "dataset_manifest",
        "name": m.name,
        "seed": m.seed,
        "config_digest": m.config_digest,
        "classes": list(m.classes),
        "images": [
            {"image_id": im.image_id, "path": im.path, "width": im.width, "height": im.height}
            for im in m.images
        ],
    }


def _annotation_dict(a: Annotation) -> dict:
    return {
        "image_id": a.image_id,
        "class_name": a.class_name,
        "bbox": list(a.bbox),
        "source": a.source,
        "difficult": a.difficult,
    }


def write_annotations(manifest: DatasetManifest, path: str | Path) -> None:
    """Write the manifest as a JSONL file: header line, then annotations."""
    manifest.validate()
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dump(_header_dict(manifest)) + "\n")
        for ann in manifest.annotations:
            fh.write(_dump(_annotation_dict(ann)) + "\n")


def _require(obj: dict, key: str, types, line: int):
    if key not in obj:
        raise SchemaError(f"missing field {key!r}", line=line)
    val = obj[key]
    if isinstance(val, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise SchemaError(f"field {key!r} has wrong type", line=line)
    if not isinstance(val, types):
        raise SchemaError(f"field {key!r} has wrong type", line=line)
    return val


def _parse_bbox(raw, line: int) -> IntBox:
    if not isinstance(raw, list) or len(raw) != 4:
        raise SchemaError(f"bbox must be a list of 4 integers, got {raw!r}", line=line)
    vals = []
    for v in raw:
        if isinstance(v, bool) or not isinstance(v, int):
            raise SchemaError(f"bbox coordinates must be integers, got {raw!r}", line=line)
        vals.append(v)
    x0, y0, x1, y1 = vals
    if x1 < x0 or y1 < y0:
        raise SchemaError(f"bbox {raw!r} is not well-ordered (xmax < xmin or ymax < ymin)", line=line)
    return (x0, y0, x1, y1)


def parse_annotation(obj: dict, line: int = 0) -> Annotation:
    image_id = _require(obj, "image_id", str, line)
    class_name = _require(obj, "class_name", str, line)
    bbox = _parse_bbox(_require(obj, "bbox", list, line), line)
    source = obj.get("source", "real")
    difficult = obj.get("difficult", False)
    if source not in ANNOTATION_SOURCES:
        raise SchemaError(f"unknown annotation source {source!r}", line=line)
    if not isinstance(difficult, bool):
        raise SchemaError("difficult must be a boolean", line=line)
    return Annotation(
        image_id=image_id, class_name=class_name, bbox=bbox, source=source, difficult=difficult
    )


def read_annotations(path: str | Path) -> DatasetManifest:
    """Parse a JSONL annotations file back into a manifest.

    Schema violations raise SchemaError carrying the 1-based line number.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise SchemaError("empty file, expected a manifest header", line=1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}", line=1) from exc
    if not isinstance(header, dict) or header.get("kind") != "dataset_manifest":
        raise SchemaError("first line must be a dataset_manifest header", line=1)
    version = header.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version!r}", line=1)
    name = _require(header, "name", str, 1)
    seed = _require(header, "seed", int, 1)
    digest = _require(header, "config_digest", str, 1)
    classes = _require(header, "classes", list, 1)
    images_raw = _require(header, "images", list, 1)
    images = []
    for im in images_raw:
        if not isinstance(im, dict):
            raise SchemaError("image entries must be objects", line=1)
        images.append(
            ImageInfo(
                image_id=_require(im, "image_id", str, 1),
                path=_require(im, "path", str, 1),
                width=_require(im, "width", int, 1),
                height=_require(im, "height", int, 1),
            )
        )
    annotations = []
    for n, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}", line=n) from exc
        if not isinstance(obj, dict):
            raise SchemaError("annotation lines must be objects", line=n)
        annotations.append(parse_annotation(obj, line=n))
    try:
        return DatasetManifest(
            name=name,
            classes=[str(c) for c in classes],
            images=images,
            annotations=annotations,
            seed=seed,
            config_digest=digest,
        )
    except (SchemaError, UnknownClassError):
        raise


def write_manifest_json(manifest: DatasetManifest, path: str | Path) -> None:
    """Companion single-document form of the manifest (pretty-printed)."""
    doc = _header_dict(manifest)
    doc["annotations"] = [_annotation_dict(a) for a in manifest.annotations]
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_manifest(path: str | Path) -> DatasetManifest:
    """Read a manifest from either the JSONL or the manifest.json form."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    first_line = text.splitlines()[0] if text else ""
    try:
        json.loads(first_line)
        return read_annotations(path)
    except json.JSONDecodeError:
        pass
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not a manifest file: {exc}", line=1) from exc
    if not isinstance(doc, dict) or doc.get("kind") != "dataset_manifest":
        raise SchemaError(f"{path}: not a dataset manifest", line=1)
    images = [
        ImageInfo(im["image_id"], im["path"], im["width"], im["height"])
        for im in doc.get("images", [])
    ]
    annotations = [parse_annotation(a) for a in doc.get("annotations", [])]
    return DatasetManifest(
        name=doc.get("name", ""),
        classes=list(doc.get("classes", [])),
        images=images,
        annotations=annotations,
        seed=doc.get("seed", 0),
        config_digest=doc.get("config_digest", ""),
    )


def split_dataset(
    manifest: DatasetManifest, n_train_per_class: int, seed: int
) -> tuple[DatasetManifest, DatasetManifest]:
    """Per-class random split: exactly ``n_train_per_class`` images to the
    train side, the rest to test; disjoint and jointly exhaustive.

    Images are bucketed by the lexicographically-first class among their
    annotations; images with no annotations go to the test side. Every
    class must have strictly more images than requested.
    """
    if n_train_per_class < 1:
        raise ValueError("n_train_per_class must be >= 1")
    by_image = manifest.annotations_by_image()
    buckets: dict[str, list[str]] = {c: [] for c in manifest.classes}
    for im in manifest.images:
        anns = by_image[im.image_id]
        if anns:
            buckets[min(a.class_name for a in anns)].append(im.image_id)
    rng = np.random.default_rng(seed)
    train_ids: set[str] = set()
    for cls in manifest.classes:
        ids = sorted(buckets[cls])
        if len(ids) <= n_train_per_class:
            raise InsufficientImagesError(cls, len(ids), n_train_per_class)
        pick = rng.choice(len(ids), size=n_train_per_class, replace=False)
        train_ids.update(ids[i] for i in pick)

    def _subset(keep: set[str], suffix: str) -> DatasetManifest:
        images = [im for im in manifest.images if im.image_id in keep]
        annotations = [a for a in manifest.annotations if a.image_id in keep]
        return DatasetManifest(
            name=f"{manifest.name}-{suffix}",
            classes=list(manifest.classes),
            images=images,
            annotations=annotations,
            seed=seed,
            config_digest=manifest.config_digest,
        )

    test_ids = {im.image_id for im in manifest.images} - train_ids
    return _subset(train_ids, "train"), _subset(test_ids, "test")


@dataclass(frozen=True)
class PlanStage:
    stage_id: int
    manifests: tuple[str, ...]
    mode: str  # "train" | "finetune"


@dataclass(frozen=True)
class CurriculumPlan:
    """Machine-readable training plan; this toolkit never trains a model."""

    plan_name: str
    stages: tuple[PlanStage, ...]
    sources: dict[str, str] = field(default_factory=dict)

    def validate(self):
        if self.plan_name not in PLAN_NAMES:
            raise SchemaError(f"unknown plan name {self.plan_name!r}")
        if self.plan_name in STAGED_PLANS:
            if len(self.stages) != 2:
                raise SchemaError("staged plans must have exactly 2 stages")
            if self.stages[0].mode != "train" or self.stages[1].mode != "finetune":
                raise SchemaError("staged plans run train then finetune")
        elif len(self.stages) != 1:
            raise SchemaError(f"plan {self.plan_name!r} must have exactly 1 stage")
        if self.plan_name == "Fusion" and len(self.stages[0].manifests) != 2:
            raise SchemaError("Fusion trains on both manifests in one stage")


def make_plan(
    plan_name: str,
    synth_manifest: DatasetManifest | None = None,
    real_train_manifest: DatasetManifest | None = None,
    synth_path: str = "",
    real_path: str = "",
) -> CurriculumPlan:
    """Build one of the six training regimes.

    Staged plans pre-train on the synthetic manifest and fine-tune on the
    real one; Fusion pools both into a single stage.
    """
    if plan_name not in PLAN_NAMES:
        raise SchemaError(f"unknown plan name {plan_name!r}; choose from {PLAN_NAMES}")
    needs_synth = plan_name != "RealImg"
    needs_real = plan_name not in SYNTH_ONLY_PLANS
    if needs_synth and synth_manifest is None:
        raise MissingManifestError(f"plan {plan_name!r} requires a synthetic manifest")
    if needs_real and real_train_manifest is None:
        raise MissingManifestError(f"plan {plan_name!r} requires a real training manifest")

    sources = {}
    if synth_manifest is not None and needs_synth:
        sources[synth_manifest.name] = synth_path
    if real_train_manifest is not None and needs_real:
        sources[real_train_manifest.name] = real_path

    if plan_name == "RealImg":
        stages = (PlanStage(1, (real_train_manifest.name,), "train"),)
    elif plan_name in SYNTH_ONLY_PLANS:
        stages = (PlanStage(1, (synth_manifest.name,), "train"),)
    elif plan_name == "Fusion":
        stages = (
            PlanStage(1, (synth_manifest.name, real_train_manifest.name), "train"),
        )
    else:
        stages = (
            PlanStage(1, (synth_manifest.name,), "train"),
            PlanStage(2, (real_train_manifest.name,), "finetune"),
        )
    plan = CurriculumPlan(plan_name=plan_name, stages=stages, sources=sources)
    plan.validate()
    return plan


def write_plan(plan: CurriculumPlan, path: str | Path) -> None:
    plan.validate()
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "curriculum_plan",
        "plan_name": plan.plan_name,
        "stages": [
            {"stage_id": s.stage_id, "manifests": list(s.manifests), "mode": s.mode}
            for s in plan.stages
        ],
        "sources": dict(sorted(plan.sources.items())),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def read_plan(path: str | Path) -> CurriculumPlan:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("kind") != "curriculum_plan":
        raise SchemaError("not a curriculum plan file")
    stages = tuple(
        PlanStage(s["stage_id"], tuple(s["manifests"]), s["mode"])
        for s in doc.get("stages", [])
    )
    plan = CurriculumPlan(
        plan_name=doc.get("plan_name", ""),
        stages=stages,
        sources=dict(doc.get("sources", {})),
    )
    plan.validate()
    return plan


def read_csv_annotations(
    path: str | Path, name: str = "imported", images_root: str | Path | None = None
) -> DatasetManifest:
    """Generic importer: CSV with columns image,class,xmin,ymin,xmax,ymax.

    Image dimensions are probed from the files when they exist (relative
    to ``images_root`` or the CSV's directory), else recorded as 0.
    """
    from PIL import Image, UnidentifiedImageError

    path = Path(path)
    root = Path(images_root) if images_root is not None else path.parent
    expected = ["image", "class", "xmin", "ymin", "xmax", "ymax"]
    annotations: list[Annotation] = []
    dims: dict[str, tuple[int, int]] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty CSV file", line=1) from None
        if [h.strip().lower() for h in header] != expected:
            raise SchemaError(f"CSV header must be {','.join(expected)}", line=1)
        for n, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 6:
                raise SchemaError(f"expected 6 columns, got {len(row)}", line=n)
            image, cls = row[0].strip(), row[1].strip()
            try:
                coords = tuple(int(v) for v in row[2:])
            except ValueError:
                raise SchemaError(f"non-integer coordinates in {row!r}", line=n) from None
            bbox = _parse_bbox(list(coords), n)
            annotations.append(
                Annotation(image_id=image, class_name=cls, bbox=bbox, source="real")
            )
            if image not in dims:
                candidate = root / image
                size = (0, 0)
                if candidate.is_file():
                    try:
                        with Image.open(candidate) as im:
                            size = im.size
                    except (OSError, UnidentifiedImageError):
                        size = (0, 0)
                dims[image] = size
    images = [
        ImageInfo(image_id=i, path=i, width=dims[i][0], height=dims[i][1])
        for i in sorted(dims)
    ]
    classes = sorted({a.class_name for a in annotations})
    return DatasetManifest(
        name=name, classes=classes, images=images, annotations=annotations
    )
