"""Evaluation: average-smoothness metric and COCO-style AP over polygon sets.

AP follows the MSCOCO convention: greedy score-ordered matching per image and
category, 101-point interpolated precision, thresholds 0.50:0.95:0.05, and
size buckets (the large-object boundary defaults to the 92x92 used for runway
data; set ``large_min = 96**2`` for the standard COCO bound). Matching against
a size bucket uses ignore semantics: ground truths outside the bucket are
ignored, predictions matched to ignored ground truths vanish from the record,
and unmatched predictions count as false positives only when their own area
falls inside the bucket.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, GeometryError, ToolkitError
from . import geometry
from .geometry import Contour
from .formats import DatasetManifest, InstanceAnnotation

RECALL_GRID = np.array([i / 100 for i in range(101)])

_INF = float("inf")


def _default_thresholds():
    return tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


@dataclass
class EvalConfig:
    iou_thresholds: tuple = field(default_factory=_default_thresholds)
    small_max: float = 32.0 ** 2
    large_min: float = 92.0 ** 2
    as_tolerance: float = 1.0

    def __post_init__(self):
        self.iou_thresholds = tuple(float(t) for t in self.iou_thresholds)
        if not self.iou_thresholds:
            raise FormatError("iou_thresholds must not be empty")
        prev = 0.0
        for t in self.iou_thresholds:
            if not prev < t <= 1.0:
                raise FormatError("iou_thresholds must be strictly increasing in (0, 1]")
            prev = t
        if not 0 < self.small_max < self.large_min:
            raise FormatError("area buckets require 0 < small_max < large_min")
        if self.as_tolerance <= 0:
            raise FormatError("as_tolerance must be positive")

    def buckets(self) -> dict:
        return {
            "all": (0.0, _INF),
            "s": (0.0, self.small_max),
            "m": (self.small_max, self.large_min),
            "l": (self.large_min, _INF),
        }


@dataclass
class MatchSet:
    """Per-category match records at one IoU threshold.

    ``records[cat]`` holds ``(score, is_tp)`` pairs sorted by descending
    score; ``gt_counts[cat]`` counts the ground-truth instances.
    """

    iou_threshold: float
    records: dict = field(default_factory=dict)
    gt_counts: dict = field(default_factory=dict)


@dataclass
class EvalReport:
    ap: float | None
    ap50: float | None
    ap75: float | None
    ap_s: float | None
    ap_m: float | None
    ap_l: float | None
    as_mean: float | None
    per_category: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "ap": self.ap, "ap50": self.ap50, "ap75": self.ap75,
            "ap_s": self.ap_s, "ap_m": self.ap_m, "ap_l": self.ap_l,
            "as_mean": self.as_mean,
            "per_category": {str(k): dict(v) for k, v in sorted(self.per_category.items())},
        }


# ---------------------------------------------------------------------------
# average smoothness
# ---------------------------------------------------------------------------

def average_smoothness(polygon, tolerance: float = 1.0) -> float:
    """Refined contour point count over log2 of the refined perimeter.

    The polygon is first refined with Douglas-Peucker at a small tolerance so
    that collinear boundary points do not count; smaller values mean smoother
    boundaries.
    """
    if isinstance(polygon, Contour):
        if not polygon.closed:
            raise GeometryError("not a closed polygon")
        pts = polygon.points
    else:
        pts = np.asarray(polygon, dtype=np.float64).reshape(-1, 2)
    refined = geometry.simplify_polyline(pts, tolerance, closed=True)
    length = geometry.perimeter(refined, closed=True)
    if length <= 1:
        raise GeometryError("degenerate perimeter")
    return len(refined) / math.log2(length)


# ---------------------------------------------------------------------------
# rasterized polygon IoU
# ---------------------------------------------------------------------------

class _Raster:
    __slots__ = ("mask", "x0", "y0", "count")

    def __init__(self, mask, x0, y0):
        self.mask = mask
        self.x0 = x0
        self.y0 = y0
        self.count = int(np.count_nonzero(mask))


def _annotation_raster(ann: InstanceAnnotation, frame_w: int, frame_h: int) -> _Raster:
    pts = np.vstack(ann.segmentation)
    x0 = max(0, int(np.floor(pts[:, 0].min())) - 1)
    y0 = max(0, int(np.floor(pts[:, 1].min())) - 1)
    x1 = min(frame_w, int(np.ceil(pts[:, 0].max())) + 1)
    y1 = min(frame_h, int(np.ceil(pts[:, 1].max())) + 1)
    if x1 <= x0 or y1 <= y0:
        return _Raster(np.zeros((0, 0), dtype=bool), 0, 0)
    mask = geometry.rasterize_polygons_window(ann.segmentation, x0, y0, x1 - x0, y1 - y0)
    return _Raster(mask, x0, y0)


def _raster_iou(a: _Raster, b: _Raster) -> float:
    if a.count == 0 and b.count == 0:
        return 0.0
    x0 = max(a.x0, b.x0)
    y0 = max(a.y0, b.y0)
    x1 = min(a.x0 + a.mask.shape[1], b.x0 + b.mask.shape[1])
    y1 = min(a.y0 + a.mask.shape[0], b.y0 + b.mask.shape[0])
    inter = 0
    if x1 > x0 and y1 > y0:
        sub_a = a.mask[y0 - a.y0:y1 - a.y0, x0 - a.x0:x1 - a.x0]
        sub_b = b.mask[y0 - b.y0:y1 - b.y0, x0 - b.x0:x1 - b.x0]
        inter = int(np.count_nonzero(sub_a & sub_b))
    union = a.count + b.count - inter
    return inter / union if union else 0.0


# ---------------------------------------------------------------------------
# matching
# ---------------------------------------------------------------------------

def _greedy_match(iou_mat: np.ndarray, gt_ignored: np.ndarray, threshold: float):
    """COCO-style greedy matching for one image/category/threshold/bucket.

    Rows of ``iou_mat`` are predictions in descending-score order. Returns for
    each prediction the matched ground-truth index (or -1), preferring any
    qualifying non-ignored ground truth over ignored ones.
    """
    n_pred, n_gt = iou_mat.shape
    order = np.argsort(gt_ignored, kind="stable")
    taken = np.zeros(n_gt, dtype=bool)
    matches = np.full(n_pred, -1, dtype=np.int64)
    for d in range(n_pred):
        best = min(threshold, 1.0 - 1e-10)
        m = -1
        for g in order:
            if taken[g]:
                continue
            if m >= 0 and not gt_ignored[m] and gt_ignored[g]:
                break
            if iou_mat[d, g] < best:
                continue
            best = iou_mat[d, g]
            m = g
        if m >= 0:
            taken[m] = True
            matches[d] = m
    return matches


def _sorted_preds(preds):
    return sorted(preds, key=lambda a: (-a.score, a.image_id, a.id))


def match_instances(gt, preds, iou_threshold: float, frames: dict) -> MatchSet:
    """Greedy score-ordered matching of predictions to ground truths.

    ``frames`` maps image id to ``(width, height)``. Matching happens within
    each (image, category) group; a prediction claims the unmatched ground
    truth with the highest IoU at or above the threshold.
    """
    for ann in preds:
        if ann.score is None:
            raise FormatError(f"prediction {ann.id} has no score")
    match_set = MatchSet(iou_threshold=iou_threshold)
    categories = sorted({a.category_id for a in gt} | {a.category_id for a in preds})
    for cat in categories:
        records = []
        n_gt = 0
        images = sorted({a.image_id for a in gt if a.category_id == cat} |
                        {a.image_id for a in preds if a.category_id == cat})
        for img in images:
            g = [a for a in gt if a.category_id == cat and a.image_id == img]
            p = _sorted_preds(a for a in preds
                              if a.category_id == cat and a.image_id == img)
            n_gt += len(g)
            w, h = frames[img]
            rasters_g = [_annotation_raster(a, w, h) for a in g]
            rasters_p = [_annotation_raster(a, w, h) for a in p]
            iou_mat = np.array([[_raster_iou(rp, rg) for rg in rasters_g]
                                for rp in rasters_p], dtype=np.float64).reshape(len(p), len(g))
            matches = _greedy_match(iou_mat, np.zeros(len(g), dtype=bool), iou_threshold)
            for d, ann in enumerate(p):
                records.append((ann.score, matches[d] >= 0, ann.image_id, ann.id))
        records.sort(key=lambda r: (-r[0], r[2], r[3]))
        match_set.records[cat] = [(s, tp) for s, tp, _, _ in records]
        match_set.gt_counts[cat] = n_gt
    return match_set


# ---------------------------------------------------------------------------
# precision / recall / AP
# ---------------------------------------------------------------------------

def pr_curve(matches: MatchSet, category_id: int):
    """Cumulative precision and recall over descending-score predictions."""
    n_gt = matches.gt_counts.get(category_id, 0)
    if n_gt == 0:
        raise ToolkitError(
            f"category {category_id} has no ground-truth instances; recall undefined")
    records = matches.records.get(category_id, [])
    if not records:
        return np.empty(0), np.empty(0)
    flags = np.array([tp for _, tp in records], dtype=bool)
    tp = np.cumsum(flags)
    fp = np.cumsum(~flags)
    precision = tp / (tp + fp)
    recall = tp / n_gt
    return precision, recall


def average_precision(precision, recall) -> float:
    """101-point interpolated AP: mean over the recall grid of the maximum
    precision at recall >= r."""
    precision = np.asarray(precision, dtype=np.float64)
    recall = np.asarray(recall, dtype=np.float64)
    if len(precision) != len(recall):
        raise ToolkitError("precision and recall must have equal length")
    if len(precision) == 0:
        return 0.0
    if np.any(np.diff(recall) < 0):
        raise ToolkitError("recall must be non-decreasing")
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_GRID, side="left")
    vals = np.where(idx < len(envelope), envelope[np.minimum(idx, len(envelope) - 1)], 0.0)
    return float(vals.mean())


def _ap_from_records(records, n_gt: int) -> float | None:
    if n_gt == 0:
        return None
    if not records:
        return 0.0
    flags = np.array([tp for _, tp in records], dtype=bool)
    tp = np.cumsum(flags)
    fp = np.cumsum(~flags)
    return average_precision(tp / (tp + fp), tp / n_gt)


# ---------------------------------------------------------------------------
# full evaluation
# ---------------------------------------------------------------------------

def evaluate(gt: DatasetManifest, predictions, config: EvalConfig | None = None) -> EvalReport:
    """Score predictions against a ground-truth manifest.

    AP values are means over categories (with at least one ground truth in
    the relevant bucket) of per-threshold APs; ``as_mean`` averages the
    smoothness metric over every predicted polygon.
    """
    config = config or EvalConfig()
    gt.validate()
    preds = predictions.annotations if isinstance(predictions, DatasetManifest) else list(predictions)
    frames = {im.id: (im.width, im.height) for im in gt.images}
    cat_ids = {c.id for c in gt.categories}
    for ann in preds:
        if ann.image_id not in frames:
            raise FormatError(
                f"prediction {ann.id} references unknown image id {ann.image_id}")
        if ann.category_id not in cat_ids:
            raise FormatError(
                f"prediction {ann.id} references unknown category id {ann.category_id}")
        if ann.score is None:
            raise FormatError(f"prediction {ann.id} has no score")

    buckets = config.buckets()
    thresholds = config.iou_thresholds
    categories = sorted(cat_ids)

    # records[(cat, thr_index, bucket)] -> [(score, tp, image_id, pred_id)]
    records = {(c, ti, b): [] for c in categories
               for ti in range(len(thresholds)) for b in buckets}
    gt_counts = {(c, b): 0 for c in categories for b in buckets}

    gt_by_ic = {}
    for ann in gt.annotations:
        gt_by_ic.setdefault((ann.image_id, ann.category_id), []).append(ann)
    pred_by_ic = {}
    for ann in preds:
        pred_by_ic.setdefault((ann.image_id, ann.category_id), []).append(ann)

    image_ids = [im.id for im in gt.images]
    for img in image_ids:
        w, h = frames[img]
        for cat in categories:
            g = gt_by_ic.get((img, cat), [])
            p = _sorted_preds(pred_by_ic.get((img, cat), []))
            if not g and not p:
                continue
            rasters_g = [_annotation_raster(a, w, h) for a in g]
            rasters_p = [_annotation_raster(a, w, h) for a in p]
            iou_mat = np.array([[_raster_iou(rp, rg) for rg in rasters_g]
                                for rp in rasters_p], dtype=np.float64).reshape(len(p), len(g))
            gt_areas = np.array([a.area for a in g], dtype=np.float64)
            for bname, (lo, hi) in buckets.items():
                gt_ig = ~((gt_areas >= lo) & (gt_areas < hi)) if len(g) else \
                    np.zeros(0, dtype=bool)
                gt_counts[(cat, bname)] += int((~gt_ig).sum())
                for ti, thr in enumerate(thresholds):
                    matches = _greedy_match(iou_mat, gt_ig, thr)
                    for d, ann in enumerate(p):
                        m = matches[d]
                        if m >= 0:
                            if not gt_ig[m]:
                                records[(cat, ti, bname)].append(
                                    (ann.score, True, ann.image_id, ann.id))
                            # matched to an ignored gt: excluded entirely
                        elif lo <= ann.area < hi:
                            records[(cat, ti, bname)].append(
                                (ann.score, False, ann.image_id, ann.id))

    ap_cat = {}
    for cat in categories:
        ap_cat[cat] = {}
        for bname in buckets:
            n_gt = gt_counts[(cat, bname)]
            per_thr = []
            for ti in range(len(thresholds)):
                recs = sorted(records[(cat, ti, bname)], key=lambda r: (-r[0], r[2], r[3]))
                per_thr.append(_ap_from_records([(s, tp) for s, tp, _, _ in recs], n_gt))
            ap_cat[cat][bname] = per_thr

    def thr_index(value):
        for i, t in enumerate(thresholds):
            if abs(t - value) < 1e-12:
                return i
        return None

    i50, i75 = thr_index(0.5), thr_index(0.75)

    def mean_over_cats(values):
        vals = [v for v in values if v is not None]
        return float(np.mean(vals)) if vals else None

    def cat_mean(cat, bname):
        per_thr = ap_cat[cat][bname]
        if per_thr[0] is None:
            return None
        return float(np.mean(per_thr))

    def cat_at(cat, index):
        if index is None:
            return None
        return ap_cat[cat]["all"][index]

    per_category = {}
    as_by_cat = {c: [] for c in categories}
    for ann in preds:
        for poly in ann.segmentation:
            as_by_cat[ann.category_id].append(
                average_smoothness(poly, config.as_tolerance))
    for cat in categories:
        per_category[cat] = {
            "ap": cat_mean(cat, "all"),
            "ap50": cat_at(cat, i50),
            "ap75": cat_at(cat, i75),
            "ap_s": cat_mean(cat, "s"),
            "ap_m": cat_mean(cat, "m"),
            "ap_l": cat_mean(cat, "l"),
            "as_mean": float(np.mean(as_by_cat[cat])) if as_by_cat[cat] else None,
        }

    all_as = [v for cat in categories for v in as_by_cat[cat]]
    return EvalReport(
        ap=mean_over_cats(cat_mean(c, "all") for c in categories),
        ap50=mean_over_cats(cat_at(c, i50) for c in categories),
        ap75=mean_over_cats(cat_at(c, i75) for c in categories),
        ap_s=mean_over_cats(cat_mean(c, "s") for c in categories),
        ap_m=mean_over_cats(cat_mean(c, "m") for c in categories),
        ap_l=mean_over_cats(cat_mean(c, "l") for c in categories),
        as_mean=float(np.mean(all_as)) if all_as else None,
        per_category=per_category,
    )
