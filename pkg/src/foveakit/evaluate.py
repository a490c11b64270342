"""Distance-binned detection evaluation.

Ingests COCO-style annotation and result files, attaches a metric distance
to every box via the pinhole relation

    distance = focal_px * class_height_m / box_height_px,

and scores predictions with greedy score-descending matching per class and
IoU threshold.  Reported metrics:

* mAP averaged over IoU thresholds 0.50:0.05:0.95 (101-point interpolation),
* the same restricted to four distance bins [0,50), [50,150), [150,250),
  [250,inf) meters,
* all-point-interpolated mAP at IoU 0.5 and 0.75,
* per-class mAP.

Bin-restricted scoring ignores (neither credits nor penalizes) predictions
matched to ground truth outside the bin, and unmatched predictions count as
false positives only inside their own bin -- mirroring how area-restricted
evaluation treats out-of-range detections.  A prediction's own bin is
derived from its predicted box height.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError, UnknownClassError

__all__ = [
    "DEFAULT_CLASS_HEIGHTS",
    "CAMERA_PRESETS",
    "BIN_LABELS",
    "COCO_IOU_THRESHOLDS",
    "ClassHeightTable",
    "CameraSpec",
    "RangedDetection",
    "EvalReport",
    "estimate_distance",
    "assign_bin",
    "ingest_coco",
    "load_annotations",
    "load_results",
    "evaluate",
    "write_report_csv",
]

# Average real-world heights (meters) per category.
DEFAULT_CLASS_HEIGHTS = {
    "person": 0.70,
    "bike": 0.71,
    "car": 1.89,
    "sign": 1.26,
    "truck": 2.90,
    "debris": 0.41,
}

# Focal lengths in pixels for the supported capture rigs.
CAMERA_PRESETS = {
    "truckdrive": 3304.0,
    "argoverse2": 1682.0,
}

BIN_LABELS = ("0_50", "50_150", "150_250", "250plus")
_BIN_UPPER = np.array([50.0, 150.0, 250.0])

COCO_IOU_THRESHOLDS = tuple(np.linspace(0.5, 0.95, 10))


@dataclass(frozen=True)
class ClassHeightTable:
    """Case-insensitive category name -> average height in meters."""

    heights: dict[str, float]

    def __post_init__(self) -> None:
        canon = {str(k).lower(): float(v) for k, v in self.heights.items()}
        for name, h in canon.items():
            if h <= 0:
                raise ValueError(f"height for {name!r} must be > 0, got {h}")
        object.__setattr__(self, "heights", canon)

    @classmethod
    def default(cls) -> "ClassHeightTable":
        return cls(dict(DEFAULT_CLASS_HEIGHTS))

    def get(self, name: str) -> float:
        key = str(name).lower()
        if key not in self.heights:
            raise UnknownClassError(
                f"category {name!r} has no class-height entry")
        return self.heights[key]


@dataclass(frozen=True)
class CameraSpec:
    """Pinhole camera reduced to its focal length in pixels."""

    focal_px: float

    def __post_init__(self) -> None:
        if not (self.focal_px > 0 and math.isfinite(self.focal_px)):
            raise ValueError(f"focal_px must be > 0, got {self.focal_px}")

    @classmethod
    def from_preset(cls, name: str) -> "CameraSpec":
        key = str(name).lower()
        if key not in CAMERA_PRESETS:
            raise ValueError(
                f"unknown camera preset {name!r}; choices: {sorted(CAMERA_PRESETS)}")
        return cls(CAMERA_PRESETS[key])


@dataclass(frozen=True)
class RangedDetection:
    """One box with its class, confidence, and estimated metric distance."""

    image_id: int
    class_id: int
    bbox: tuple[float, float, float, float]  # x_min, y_min, w, h in pixels
    score: float
    distance: float


def estimate_distance(h_px: float, class_name: str, heights: ClassHeightTable,
                      camera: CameraSpec) -> float:
    """Pinhole distance estimate from box height in pixels."""
    if h_px <= 0:
        raise ValueError(f"box pixel height must be > 0, got {h_px}")
    return camera.focal_px * heights.get(class_name) / h_px


def assign_bin(distance: float) -> int:
    """Index of the half-open distance bin containing ``distance``."""
    if distance < 0:
        raise ValueError(f"distance must be >= 0, got {distance}")
    return int(np.searchsorted(_BIN_UPPER, distance, side="right"))


# ---------------------------------------------------------------------------
# COCO ingestion


def _require(obj, key: str, where: str):
    if key not in obj:
        raise SchemaError(f"{where}: missing key {key!r}")
    return obj[key]


def _check_bbox(raw, where: str) -> tuple[float, float, float, float]:
    if (not isinstance(raw, (list, tuple)) or len(raw) != 4
            or not all(isinstance(v, (int, float)) for v in raw)):
        raise SchemaError(f"{where}: bbox must be 4 numbers, got {raw!r}")
    x, y, w, h = (float(v) for v in raw)
    if w <= 0 or h <= 0:
        raise SchemaError(f"{where}: bbox extents must be > 0, got {raw!r}")
    return (x, y, w, h)


@dataclass
class CocoDataset:
    gts: list[RangedDetection]
    categories: dict[int, str]                 # id -> name, id-ordered
    images: dict[int, tuple[int, int]] = field(default_factory=dict)


def load_annotations(path, heights: ClassHeightTable, camera: CameraSpec,
                     ) -> CocoDataset:
    """Parse a COCO annotation file and attach distances to every box."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: top level must be an object")

    categories: dict[int, str] = {}
    for i, cat in enumerate(_require(data, "categories", path)):
        where = f"{path}: categories[{i}]"
        cid = int(_require(cat, "id", where))
        name = str(_require(cat, "name", where))
        heights.get(name)  # fail fast on categories we cannot range
        categories[cid] = name
    categories = dict(sorted(categories.items()))

    images: dict[int, tuple[int, int]] = {}
    for i, img in enumerate(data.get("images", [])):
        where = f"{path}: images[{i}]"
        images[int(_require(img, "id", where))] = (
            int(img.get("width", 0)), int(img.get("height", 0)))

    gts: list[RangedDetection] = []
    for i, ann in enumerate(_require(data, "annotations", path)):
        where = f"{path}: annotations[{i}]"
        cid = int(_require(ann, "category_id", where))
        if cid not in categories:
            raise SchemaError(f"{where}: unknown category_id {cid}")
        bbox = _check_bbox(_require(ann, "bbox", where), where)
        image_id = int(_require(ann, "image_id", where))
        if images and image_id not in images:
            raise SchemaError(f"{where}: unknown image_id {image_id}")
        gts.append(RangedDetection(
            image_id=image_id, class_id=cid, bbox=bbox, score=1.0,
            distance=estimate_distance(bbox[3], categories[cid], heights,
                                       camera)))
    return CocoDataset(gts=gts, categories=categories, images=images)


def load_results(path, dataset: CocoDataset, heights: ClassHeightTable,
                 camera: CameraSpec) -> list[RangedDetection]:
    """Parse a COCO result list against an already-loaded dataset."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, list):
        raise SchemaError(f"{path}: result file must be a JSON array")
    preds: list[RangedDetection] = []
    for i, det in enumerate(data):
        where = f"{path}: [{i}]"
        cid = int(_require(det, "category_id", where))
        if cid not in dataset.categories:
            raise SchemaError(f"{where}: unknown category_id {cid}")
        bbox = _check_bbox(_require(det, "bbox", where), where)
        score = float(_require(det, "score", where))
        if not (0.0 <= score <= 1.0):
            raise SchemaError(f"{where}: score must be in [0, 1], got {score}")
        preds.append(RangedDetection(
            image_id=int(_require(det, "image_id", where)), class_id=cid,
            bbox=bbox, score=score,
            distance=estimate_distance(bbox[3], dataset.categories[cid],
                                       heights, camera)))
    return preds


def ingest_coco(annotation_path, result_path=None,
                heights: ClassHeightTable | None = None,
                camera: CameraSpec | None = None,
                ) -> tuple[list[RangedDetection], list[RangedDetection],
                           dict[int, str]]:
    """Load (ground truths, predictions, categories) in one call."""
    heights = heights or ClassHeightTable.default()
    camera = camera or CameraSpec.from_preset("truckdrive")
    dataset = load_annotations(annotation_path, heights, camera)
    preds = (load_results(result_path, dataset, heights, camera)
             if result_path is not None else [])
    return dataset.gts, preds, dataset.categories


# ---------------------------------------------------------------------------
# Matching and AP


def _iou_xywh(a: tuple, b: tuple) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (aw * ah + bw * bh - inter)


def _sorted_pred_order(preds: list[RangedDetection]) -> list[int]:
    return sorted(range(len(preds)),
                  key=lambda i: (-preds[i].score, preds[i].image_id, i))


def _greedy_match(gts: list[RangedDetection], preds: list[RangedDetection],
                  order: list[int], thr: float,
                  gt_ignore: np.ndarray) -> np.ndarray:
    """Matched GT index per prediction (-1 when unmatched).

    Predictions are visited in descending score; each claims the unmatched
    same-image GT with the highest IoU >= thr, preferring non-ignored GTs
    over ignored ones regardless of IoU.
    """
    by_image: dict[int, list[int]] = {}
    for gi, gt in enumerate(gts):
        by_image.setdefault(gt.image_id, []).append(gi)
    taken = np.zeros(len(gts), dtype=bool)
    match = np.full(len(preds), -1, dtype=np.int64)
    for pi in order:
        pred = preds[pi]
        best_gi, best_iou = -1, -1.0
        best_ign_gi, best_ign_iou = -1, -1.0
        for gi in by_image.get(pred.image_id, ()):
            if taken[gi]:
                continue
            ov = _iou_xywh(pred.bbox, gts[gi].bbox)
            if ov < thr:
                continue
            if gt_ignore[gi]:
                if ov > best_ign_iou:
                    best_ign_gi, best_ign_iou = gi, ov
            elif ov > best_iou:
                best_gi, best_iou = gi, ov
        chosen = best_gi if best_gi != -1 else best_ign_gi
        if chosen != -1:
            taken[chosen] = True
            match[pi] = chosen
    return match


def _ap_from_flags(flags: list[str], n_positive: int, method: str) -> float:
    """AP from ordered per-prediction outcomes ('tp'/'fp'; others dropped)."""
    kept = [f for f in flags if f in ("tp", "fp")]
    if n_positive == 0:
        raise ValueError("AP undefined with zero positives")
    if not kept:
        return 0.0
    tp = np.cumsum([f == "tp" for f in kept], dtype=np.float64)
    fp = np.cumsum([f == "fp" for f in kept], dtype=np.float64)
    recall = tp / n_positive
    precision = tp / (tp + fp)
    # Precision envelope: best precision achievable at recall >= r.
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    if method == "coco101":
        points = np.linspace(0.0, 1.0, 101)
        idx = np.searchsorted(recall, points, side="left")
        sampled = np.where(idx < len(envelope), envelope[np.minimum(idx, len(envelope) - 1)], 0.0)
        return float(sampled.mean())
    if method == "pascal_all":
        mrec = np.concatenate([[0.0], recall, [1.0]])
        mpre = np.concatenate([[0.0], envelope, [0.0]])
        steps = np.nonzero(mrec[1:] != mrec[:-1])[0]
        return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))
    raise ValueError(f"unknown AP method {method!r}")


def _class_ap(gts: list[RangedDetection], preds: list[RangedDetection],
              thr: float, *, bin_idx: int | None = None,
              method: str = "coco101") -> float | None:
    """AP for one class at one IoU threshold, optionally bin-restricted.

    Returns None when the (restricted) ground-truth set is empty, meaning
    the class does not participate in the mean.
    """
    if bin_idx is None:
        gt_ignore = np.zeros(len(gts), dtype=bool)
    else:
        gt_ignore = np.array([assign_bin(g.distance) != bin_idx for g in gts])
    n_positive = int(np.sum(~gt_ignore))
    if n_positive == 0:
        return None
    order = _sorted_pred_order(preds)
    match = _greedy_match(gts, preds, order, thr, gt_ignore)
    flags: list[str] = []
    for pi in order:
        gi = match[pi]
        if gi >= 0:
            flags.append("ignored" if gt_ignore[gi] else "tp")
        elif bin_idx is not None and assign_bin(preds[pi].distance) != bin_idx:
            flags.append("ignored")
        else:
            flags.append("fp")
    return _ap_from_flags(flags, n_positive, method)


@dataclass(frozen=True)
class EvalReport:
    """Table-shaped metric summary; every value lies in [0, 1]."""

    coco_map: float
    bin_maps: tuple[float, float, float, float]
    pascal50: float
    pascal75: float
    per_class: dict[str, float | None]

    def to_dict(self) -> dict:
        out = {"mAP": self.coco_map}
        for label, value in zip(BIN_LABELS, self.bin_maps):
            out[f"mAP_{label}"] = value
        out["mAP50"] = self.pascal50
        out["mAP75"] = self.pascal75
        out["per_class"] = dict(self.per_class)
        return out


def _mean_or(values: list[float], default: float = 0.0) -> float:
    return float(np.mean(values)) if values else default


def evaluate(gts: list[RangedDetection], preds: list[RangedDetection],
             categories: dict[int, str]) -> EvalReport:
    """Score predictions against ground truth; see the module docstring."""
    by_class_gt = {cid: [g for g in gts if g.class_id == cid]
                   for cid in categories}
    by_class_pred = {cid: [p for p in preds if p.class_id == cid]
                     for cid in categories}

    per_class: dict[str, float | None] = {}
    coco_values: list[float] = []
    pascal50_values: list[float] = []
    pascal75_values: list[float] = []
    bin_values: list[list[float]] = [[] for _ in BIN_LABELS]

    for cid in sorted(categories):
        cg, cp = by_class_gt[cid], by_class_pred[cid]
        if not cg:
            per_class[categories[cid]] = None
            continue
        thr_aps = [_class_ap(cg, cp, thr) for thr in COCO_IOU_THRESHOLDS]
        class_map = float(np.mean(thr_aps))
        per_class[categories[cid]] = class_map
        coco_values.append(class_map)
        pascal50_values.append(_class_ap(cg, cp, 0.5, method="pascal_all"))
        pascal75_values.append(_class_ap(cg, cp, 0.75, method="pascal_all"))
        for b in range(len(BIN_LABELS)):
            aps = [_class_ap(cg, cp, thr, bin_idx=b)
                   for thr in COCO_IOU_THRESHOLDS]
            if aps[0] is not None:
                bin_values[b].append(float(np.mean(aps)))

    return EvalReport(
        coco_map=_mean_or(coco_values),
        bin_maps=tuple(_mean_or(v) for v in bin_values),
        pascal50=_mean_or(pascal50_values),
        pascal75=_mean_or(pascal75_values),
        per_class=per_class,
    )


def write_report_csv(report: EvalReport, path, method_label: str = "predictions",
                     ) -> None:
    """Fixed-column CSV mirroring the distance/class table layout."""
    header = ["method", "mAP", "mAP_0_50", "mAP_50_150", "mAP_150_250",
              "mAP_250plus", "mAP50", "mAP75"]
    header += list(report.per_class.keys())
    row = [method_label, f"{report.coco_map:.6f}"]
    row += [f"{v:.6f}" for v in report.bin_maps]
    row += [f"{report.pascal50:.6f}", f"{report.pascal75:.6f}"]
    row += ["" if v is None else f"{v:.6f}" for v in report.per_class.values()]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerow(row)
