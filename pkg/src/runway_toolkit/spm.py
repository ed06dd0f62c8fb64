"""Smoothing pipeline: rough instance mask -> clean quadrilateral (or polygon).

The pipeline runs coarse-to-fine: repeated morphological opening, border
tracing, corner location from two transversal cross-sections, orthogonal
least-squares fitting of the four edges, and an IoU gate that falls back to
Douglas-Peucker polygon approximation whenever the quadrilateral is a bad fit.
Instances smaller than a configurable fraction of the frame pass through
untouched.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError
from . import geometry
from .geometry import Contour

KIND_QUADRILATERAL = "quadrilateral"
KIND_DP_FALLBACK = "dp_fallback"
KIND_PASSTHROUGH = "passthrough"


@dataclass
class SpmConfig:
    element_size: int = 3
    open_repetitions: int = 3
    area_gate: float = 0.001        # fraction of frame pixels
    iou_threshold: float = 0.9
    transversal_offsets: tuple[float, float] = (0.25, 0.75)
    tolerance_log_base: float = math.e

    def __post_init__(self):
        if self.element_size < 1 or self.element_size % 2 == 0:
            raise GeometryError("element_size must be odd and >= 1")
        if self.open_repetitions < 1:
            raise GeometryError("open_repetitions must be >= 1")
        if not 0 < self.area_gate < 1:
            raise GeometryError("area_gate must be in (0, 1)")
        if not 0 < self.iou_threshold <= 1:
            raise GeometryError("iou_threshold must be in (0, 1]")
        lo, hi = self.transversal_offsets
        if not (0 < lo < 1 and 0 < hi < 1 and lo != hi):
            raise GeometryError("transversal offsets must be distinct fractions in (0, 1)")
        if self.tolerance_log_base <= 1:
            raise GeometryError("tolerance_log_base must exceed 1")


@dataclass
class CornerSet:
    center: np.ndarray          # (2,)
    positioning: np.ndarray     # (2, 2) upper and lower positioning points
    corners: np.ndarray         # (4, 2) counter-clockwise about center


@dataclass
class SmoothResult:
    polygon: Contour
    kind: str
    fit_iou: float


def adaptive_tolerance(length: float, log_base: float = math.e) -> float:
    """Douglas-Peucker tolerance scaled to the instance perimeter."""
    if length <= 1:
        raise GeometryError("degenerate perimeter")
    return 0.01 * math.log(length) / math.log(log_base)


def _transversal_crossings(pts: np.ndarray, y_line: float) -> np.ndarray:
    """x coordinates where the closed polyline crosses the horizontal line."""
    nxt = np.roll(pts, -1, axis=0)
    y1, y2 = pts[:, 1], nxt[:, 1]
    lo = np.minimum(y1, y2)
    hi = np.maximum(y1, y2)
    sel = (y1 != y2) & (lo <= y_line) & (y_line < hi)
    if not sel.any():
        return np.empty(0)
    t = (y_line - y1[sel]) / (y2[sel] - y1[sel])
    return np.sort(pts[sel, 0] + t * (nxt[sel, 0] - pts[sel, 0]))


def locate_corners(contour: Contour, center, config: SpmConfig | None = None) -> CornerSet:
    """Find the four corner points of a roughly quadrilateral contour.

    Two horizontal transversal lines are placed at the configured fractions of
    the bounding-box height. The midpoint of the leftmost and rightmost
    crossings on each line gives a positioning point; the positioning points
    and the center define an axis frame whose quadrants split the contour
    points into four sets, and the point farthest from the center in each set
    is taken as a corner.
    """
    config = config or SpmConfig()
    pts = contour.points
    if len(pts) < 8:
        raise GeometryError("degenerate cross-section")
    o = np.asarray(center, dtype=np.float64).reshape(2)
    xmin, ymin = pts.min(axis=0)
    xmax, ymax = pts.max(axis=0)
    if not (xmin <= o[0] <= xmax and ymin <= o[1] <= ymax):
        raise GeometryError("center outside contour bounding box")
    height = ymax - ymin
    if height <= 1e-9:
        raise GeometryError("degenerate cross-section")
    positioning = np.empty((2, 2))
    for k, frac in enumerate(sorted(config.transversal_offsets)):
        y_line = ymin + frac * height
        xs = _transversal_crossings(pts, y_line)
        if len(xs) < 2:
            raise GeometryError("degenerate cross-section")
        positioning[k] = ((xs[0] + xs[-1]) / 2.0, y_line)
    axis = positioning[0] - positioning[1]
    norm = np.hypot(*axis)
    if norm <= 1e-9:
        raise GeometryError("degenerate cross-section")
    u = axis / norm
    v = np.array([-u[1], u[0]])
    rel = pts - o
    s = rel @ u
    t = rel @ v
    quadrant = np.where(s >= 0, np.where(t >= 0, 0, 3), np.where(t >= 0, 1, 2))
    dist = (rel ** 2).sum(axis=1)
    corners = np.empty((4, 2))
    for q in range(4):
        members = np.nonzero(quadrant == q)[0]
        if len(members) == 0:
            raise GeometryError("empty corner sector")
        corners[q] = pts[members[np.argmax(dist[members])]]
    ang = np.arctan2(corners[:, 1] - o[1], corners[:, 0] - o[0])
    corners = corners[np.argsort(ang, kind="stable")]
    for i in range(4):
        for j in range(i + 1, 4):
            if np.array_equal(corners[i], corners[j]):
                raise GeometryError("coincident corners")
    return CornerSet(center=o, positioning=positioning, corners=corners)


def fit_quadrilateral(contour: Contour, corner_set: CornerSet) -> Contour:
    """Fit one line per corner-to-corner arc and intersect adjacent lines.

    All contour points participate: each point is assigned to the angular
    sector between consecutive corners (about the center), every sector is
    fitted with orthogonal least squares, and the four intersections form the
    quadrilateral, ordered counter-clockwise.
    """
    pts = contour.points
    o = corner_set.center
    thetas = np.arctan2(corner_set.corners[:, 1] - o[1], corner_set.corners[:, 0] - o[0])
    ang = np.arctan2(pts[:, 1] - o[1], pts[:, 0] - o[0])
    sector = np.searchsorted(thetas, ang, side="right") - 1
    sector[sector < 0] = 3
    lines = []
    try:
        for k in range(4):
            members = pts[sector == k]
            if len(members) < 2:
                raise GeometryError("degenerate quadrilateral")
            lines.append(geometry.fit_line_least_squares(members))
        vertices = np.array([
            geometry.intersect_lines(lines[k - 1], lines[k]) for k in range(4)
        ])
    except GeometryError as exc:
        raise GeometryError("degenerate quadrilateral") from exc
    if not np.isfinite(vertices).all():
        raise GeometryError("degenerate quadrilateral")
    if not _is_simple_quad(vertices):
        raise GeometryError("degenerate quadrilateral")
    if geometry.signed_area(vertices) < 0:
        vertices = np.vstack([vertices[:1], vertices[:0:-1]])
    return Contour(vertices, closed=True)


def _segments_cross(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-12 else (1 if v > 0 else -1)

    return (orient(p1, p2, p3) * orient(p1, p2, p4) < 0 and
            orient(p3, p4, p1) * orient(p3, p4, p2) < 0)


def _is_simple_quad(v: np.ndarray) -> bool:
    if _segments_cross(v[0], v[1], v[2], v[3]):
        return False
    if _segments_cross(v[1], v[2], v[3], v[0]):
        return False
    return abs(geometry.signed_area(v)) > 1e-9


def _largest_component(mask: np.ndarray):
    from . import kernels

    labels, count = kernels.label_components(np.ascontiguousarray(mask, dtype=np.uint8))
    if count == 0:
        return None
    if count == 1:
        return mask.astype(bool)
    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    best = int(np.argmax(sizes[1:]) + 1)
    return labels == best


def _trace_largest(mask: np.ndarray):
    comp = _largest_component(mask)
    contours = geometry.trace_contours(comp)
    return contours[0], comp


def smooth_instance(mask, config: SpmConfig | None = None) -> SmoothResult:
    """Run the full smoothing pipeline on one instance mask.

    Instances no larger than ``area_gate`` of the frame pass through with
    their traced contour unchanged. Otherwise the mask is opened, its largest
    component traced, corners located and a quadrilateral fitted; if the
    quadrilateral's IoU against the original mask falls below
    ``iou_threshold`` (or any geometric step degenerates), the traced contour
    is instead simplified with an adaptive Douglas-Peucker tolerance.
    """
    config = config or SpmConfig()
    m = geometry.as_mask(mask)
    frame_h, frame_w = m.shape
    area = int(np.count_nonzero(m))
    if area == 0:
        raise GeometryError("empty mask")

    rows, cols = np.nonzero(m)
    margin = config.element_size * config.open_repetitions + 2
    y0 = max(0, int(rows.min()) - margin)
    y1 = min(frame_h, int(rows.max()) + margin + 1)
    x0 = max(0, int(cols.min()) - margin)
    x1 = min(frame_w, int(cols.max()) + margin + 1)
    crop = m[y0:y1, x0:x1]
    shift = np.array([x0, y0], dtype=np.float64)

    frame = (frame_w, frame_h)
    if area <= config.area_gate * frame_w * frame_h:
        contour, _ = _trace_largest(crop)
        poly = Contour(contour.points + shift, closed=True)
        return SmoothResult(poly, KIND_PASSTHROUGH, _fit_iou(poly, crop, shift, frame))

    opened = geometry.morphological_open(
        crop, config.element_size, config.open_repetitions)
    source = opened if opened.any() else crop
    contour, comp = _trace_largest(source)
    local = contour.points

    if len(local) >= 3:
        try:
            center = geometry.centroid(comp) + 0.5
            corner_set = locate_corners(Contour(local), center, config)
            quad_local = fit_quadrilateral(Contour(local), corner_set)
            quad = Contour(quad_local.points + shift, closed=True)
            iou = _fit_iou(quad, crop, shift, frame)
            if iou >= config.iou_threshold:
                return SmoothResult(quad, KIND_QUADRILATERAL, iou)
        except GeometryError:
            pass

    try:
        length = geometry.perimeter(local, closed=True)
        tol = adaptive_tolerance(length, config.tolerance_log_base)
        simplified = geometry.simplify_polyline(local, tol, closed=True)
        poly = Contour(simplified + shift, closed=True)
        return SmoothResult(poly, KIND_DP_FALLBACK, _fit_iou(poly, crop, shift, frame))
    except GeometryError:
        # too small or thin to simplify: hand back the traced contour
        poly = Contour(local + shift, closed=True)
        return SmoothResult(poly, KIND_PASSTHROUGH, _fit_iou(poly, crop, shift, frame))


def _fit_iou(polygon: Contour, crop_mask: np.ndarray, shift: np.ndarray,
             frame: tuple[int, int]) -> float:
    """IoU of the polygon raster against the cropped instance mask.

    Rasterization happens on the union of the crop window and the polygon's
    bounding box, clipped to the frame, so the value equals the full-frame IoU.
    """
    pts = polygon.points
    if len(pts) < 3:
        return 0.0
    h, w = crop_mask.shape
    x0, y0 = int(shift[0]), int(shift[1])
    px0 = max(0, min(x0, int(np.floor(pts[:, 0].min())) - 1))
    py0 = max(0, min(y0, int(np.floor(pts[:, 1].min())) - 1))
    px1 = min(frame[0], max(x0 + w, int(np.ceil(pts[:, 0].max())) + 1))
    py1 = min(frame[1], max(y0 + h, int(np.ceil(pts[:, 1].max())) + 1))
    if px1 <= px0 or py1 <= py0:
        return 0.0
    raster = geometry.rasterize_polygons_window([pts], px0, py0, px1 - px0, py1 - py0)
    ref = np.zeros_like(raster)
    ref[y0 - py0:y0 - py0 + h, x0 - px0:x0 - px0 + w] = crop_mask
    return geometry.mask_iou(raster, ref)
