"""Detection scoring: IoU, greedy matching, per-class AP and mAP.

Boxes use inclusive integer corners, so areas count pixels
(width = xmax - xmin + 1); this matches the annotation schema. Matching is
greedy in descending score with ties broken by input order; each ground
truth can satisfy at most one detection. AP supports the all-point
interpolated area and the legacy eleven-point mean.

The ``reference_*`` functions at the bottom re-derive the same quantities
with naive step-by-step enumeration; they exist to cross-check the fast
path on small instances and should stay dumb.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Annotation, DatasetManifest
from .errors import ClassMismatchError, SchemaError
from .raster import IntBox

INTERPOLATION_MODES = ("all_point", "eleven_point")


@dataclass(frozen=True)
class Detection:
    image_id: str
    class_name: str
    bbox: IntBox
    score: float

    def __post_init__(self):
        x0, y0, x1, y1 = self.bbox
        if x1 < x0 or y1 < y0:
            raise SchemaError(f"malformed detection bbox {self.bbox}")
        if not np.isfinite(self.score):
            raise SchemaError(f"detection score must be finite, got {self.score}")


def iou(a: IntBox, b: IntBox) -> float:
    """Intersection over union under the inclusive-corner pixel convention."""
    ix0, iy0 = max(a[0], b[0]), max(a[1], b[1])
    ix1, iy1 = min(a[2], b[2]), min(a[3], b[3])
    iw, ih = ix1 - ix0 + 1, iy1 - iy0 + 1
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (a[2] - a[0] + 1) * (a[3] - a[1] + 1)
    area_b = (b[2] - b[0] + 1) * (b[3] - b[1] + 1)
    return inter / (area_a + area_b - inter)


@dataclass
class ClassMatches:
    """Per-class matching outcome: labels in descending-score order."""

    detections: list[Detection] = field(default_factory=list)
    tp_flags: list[bool] = field(default_factory=list)
    n_gt: int = 0


def match_detections(
    detections: list[Detection],
    ground_truth: list[Annotation],
    iou_threshold: float = 0.5,
) -> dict[str, ClassMatches]:
    """Label every detection TP or FP against the ground truth.

    Detections are grouped by (class, image); within a group they are
    processed in descending score (stable on ties) and each claims the
    unmatched ground-truth box of highest IoU when that IoU reaches the
    threshold. Difficult ground truths are excluded from n_gt and silently
    absorb detections that would otherwise match them.
    """
    classes = sorted(
        {a.class_name for a in ground_truth} | {d.class_name for d in detections}
    )
    result = {c: ClassMatches() for c in classes}
    for ann in ground_truth:
        if not ann.difficult:
            result[ann.class_name].n_gt += 1

    gts_by_key: dict[tuple[str, str], list[Annotation]] = {}
    for ann in ground_truth:
        gts_by_key.setdefault((ann.class_name, ann.image_id), []).append(ann)

    dets_by_class: dict[str, list[tuple[int, Detection]]] = {c: [] for c in classes}
    for i, det in enumerate(detections):
        dets_by_class[det.class_name].append((i, det))

    for cls in classes:
        ordered = sorted(dets_by_class[cls], key=lambda t: (-t[1].score, t[0]))
        matched: dict[tuple[str, str], list[bool]] = {}
        for _, det in ordered:
            key = (cls, det.image_id)
            gts = gts_by_key.get(key, [])
            taken = matched.setdefault(key, [False] * len(gts))
            best_iou, best_j = 0.0, -1
            for j, gt in enumerate(gts):
                if taken[j] or gt.difficult:
                    continue
                ov = iou(det.bbox, gt.bbox)
                if ov > best_iou:
                    best_iou, best_j = ov, j
            if best_j >= 0 and best_iou >= iou_threshold:
                taken[best_j] = True
                result[cls].detections.append(det)
                result[cls].tp_flags.append(True)
                continue
            # A detection that would only match a difficult box is ignored.
            absorbed = any(
                gt.difficult and iou(det.bbox, gt.bbox) >= iou_threshold for gt in gts
            )
            if not absorbed:
                result[cls].detections.append(det)
                result[cls].tp_flags.append(False)
    return result


def average_precision(
    tp_flags: list[bool], n_gt: int, interpolation: str = "all_point"
) -> float | None:
    """AP from TP/FP labels given in descending-score order.

    Returns 0.0 when there is no ground truth but detections exist, and
    None (undefined, excluded from mAP) when there is neither.
    """
    if interpolation not in INTERPOLATION_MODES:
        raise ValueError(f"unknown interpolation {interpolation!r}")
    if n_gt == 0:
        return 0.0 if tp_flags else None
    if not tp_flags:
        return 0.0
    tp = np.cumsum(np.asarray(tp_flags, dtype=np.float64))
    fp = np.cumsum(~np.asarray(tp_flags, dtype=bool))
    recall = tp / n_gt
    precision = tp / (tp + fp)
    if interpolation == "eleven_point":
        total = 0.0
        for i in range(11):
            # i/10, not arange steps: 0.30000000000000004 would exclude a
            # recall of exactly 3/10
            mask = recall >= i / 10.0
            total += float(precision[mask].max()) if mask.any() else 0.0
        return total / 11.0
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(mpre.size - 1, 0, -1):
        mpre[i - 1] = max(mpre[i - 1], mpre[i])
    change = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[change + 1] - mrec[change]) * mpre[change + 1]))


def pr_points(tp_flags: list[bool], n_gt: int) -> list[tuple[float, float]]:
    """(recall, precision) after each detection, in score order."""
    pts = []
    tp = 0
    for k, flag in enumerate(tp_flags, start=1):
        tp += bool(flag)
        pts.append((tp / n_gt if n_gt else 0.0, tp / k))
    return pts


@dataclass
class EvalReport:
    per_class_ap: dict[str, float]
    mean_ap: float
    per_class_pr: dict[str, list[tuple[float, float]]]
    counts: dict[str, dict[str, int]]
    iou_threshold: float
    interpolation: str

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "eval_report",
            "iou_threshold": self.iou_threshold,
            "interpolation": self.interpolation,
            "map": self.mean_ap,
            "per_class_ap": {c: self.per_class_ap[c] for c in sorted(self.per_class_ap)},
            "counts": {c: self.counts[c] for c in sorted(self.counts)},
            "per_class_pr": {
                c: [[r, p] for r, p in self.per_class_pr[c]]
                for c in sorted(self.per_class_pr)
            },
        }

    def format_table(self) -> str:
        """Aligned text table: one class per row, AP column, mAP last."""
        rows = [(c, f"{self.per_class_ap[c]:.4f}") for c in sorted(self.per_class_ap)]
        rows.append(("mAP", f"{self.mean_ap:.4f}"))
        name_w = max(len(r[0]) for r in rows + [("class", "")])
        lines = [f"{'class':<{name_w}}  AP", f"{'-' * name_w}  ------"]
        lines += [f"{name:<{name_w}}  {ap}" for name, ap in rows]
        return "\n".join(lines)


def evaluate(
    detections: list[Detection],
    gt_manifest: DatasetManifest,
    iou_threshold: float = 0.5,
    interpolation: str = "all_point",
) -> EvalReport:
    """Score detections against a ground-truth manifest.

    Matching accumulates across the whole test set per class; mAP is the
    arithmetic mean of AP over classes that have ground truth.
    """
    gt_classes = set(gt_manifest.classes)
    for det in detections:
        if det.class_name not in gt_classes:
            raise ClassMismatchError(
                f"prediction class {det.class_name!r} absent from ground-truth classes"
            )
    matches = match_detections(detections, gt_manifest.annotations, iou_threshold)
    per_class_ap: dict[str, float] = {}
    per_class_pr: dict[str, list[tuple[float, float]]] = {}
    counts: dict[str, dict[str, int]] = {}
    for cls in sorted(set(gt_manifest.classes) | set(matches)):
        m = matches.get(cls, ClassMatches())
        ap = average_precision(m.tp_flags, m.n_gt, interpolation)
        n_tp = sum(m.tp_flags)
        counts[cls] = {
            "n_gt": m.n_gt,
            "n_det": len(m.detections),
            "n_tp": int(n_tp),
            "n_fp": int(len(m.tp_flags) - n_tp),
        }
        per_class_pr[cls] = pr_points(m.tp_flags, m.n_gt)
        if ap is not None:
            per_class_ap[cls] = ap
    with_gt = [c for c, ap in per_class_ap.items() if counts[c]["n_gt"] > 0]
    mean_ap = sum(per_class_ap[c] for c in with_gt) / len(with_gt) if with_gt else 0.0
    return EvalReport(
        per_class_ap=per_class_ap,
        mean_ap=mean_ap,
        per_class_pr=per_class_pr,
        counts=counts,
        iou_threshold=iou_threshold,
        interpolation=interpolation,
    )


def read_detections(path: str | Path) -> list[Detection]:
    """Parse a JSON Lines prediction file."""
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for n, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc}", line=n) from exc
            if not isinstance(obj, dict):
                raise SchemaError("detection lines must be objects", line=n)
            try:
                bbox = obj["bbox"]
                det = Detection(
                    image_id=str(obj["image_id"]),
                    class_name=str(obj["class_name"]),
                    bbox=(int(bbox[0]), int(bbox[1]), int(bbox[2]), int(bbox[3])),
                    score=float(obj["score"]),
                )
            except (KeyError, TypeError, ValueError, IndexError) as exc:
                raise SchemaError(f"bad detection record: {exc}", line=n) from exc
            out.append(det)
    return out


def write_detections(detections: list[Detection], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for d in detections:
            fh.write(
                json.dumps(
                    {
                        "image_id": d.image_id,
                        "class_name": d.class_name,
                        "bbox": list(d.bbox),
                        "score": d.score,
                    },
                    separators=(",", ":"),
                )
                + "\n"
            )


# --- naive reference implementations (verification only) ---------------------


def reference_match(
    detections: list[Detection],
    ground_truth: list[Annotation],
    iou_threshold: float = 0.5,
) -> dict[str, tuple[list[bool], int]]:
    """Greedy matching replayed step by step with plain lists.

    Returns per class (tp_flags in processing order, n_gt).
    """
    classes = sorted(
        {a.class_name for a in ground_truth} | {d.class_name for d in detections}
    )
    out = {}
    for cls in classes:
        gts = [g for g in ground_truth if g.class_name == cls]
        n_gt = len([g for g in gts if not g.difficult])
        dets = [(i, d) for i, d in enumerate(detections) if d.class_name == cls]
        dets.sort(key=lambda t: (-t[1].score, t[0]))
        used = [False] * len(gts)
        flags = []
        for _, det in dets:
            best, best_j = 0.0, -1
            for j, gt in enumerate(gts):
                if used[j] or gt.difficult or gt.image_id != det.image_id:
                    continue
                ov = iou(det.bbox, gt.bbox)
                if ov > best:
                    best, best_j = ov, j
            if best_j >= 0 and best >= iou_threshold:
                used[best_j] = True
                flags.append(True)
            else:
                hits_difficult = any(
                    gt.difficult
                    and gt.image_id == det.image_id
                    and iou(det.bbox, gt.bbox) >= iou_threshold
                    for gt in gts
                )
                if not hits_difficult:
                    flags.append(False)
        out[cls] = (flags, n_gt)
    return out


def reference_average_precision(
    tp_flags: list[bool], n_gt: int, interpolation: str = "all_point"
) -> float | None:
    """AP from first principles: scan every prefix, then integrate the
    precision envelope recall level by recall level."""
    if n_gt == 0:
        return 0.0 if tp_flags else None
    points = []
    tp = 0
    for k, flag in enumerate(tp_flags, start=1):
        tp += bool(flag)
        points.append((tp / n_gt, tp / k))
    if interpolation == "eleven_point":
        total = 0.0
        for i in range(11):
            t = i / 10.0
            candidates = [p for r, p in points if r >= t]
            total += max(candidates) if candidates else 0.0
        return total / 11.0
    ap = 0.0
    prev_r = 0.0
    for r, _ in points:
        if r == prev_r:
            continue
        best = max(p for rr, p in points if rr >= r)
        ap += (r - prev_r) * best
        prev_r = r
    return ap
