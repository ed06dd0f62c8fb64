"""Semiautomatic annotation propagation via inverse perspective mapping.

One fully annotated reference image per runway group is rectified into a
canonical top-view rectangle; the relative size and position of the marking
categories inside that rectangle form a proportion model. Any other image in
the group then needs only its runway quadrilateral: the model is warped back
through the image's own homography to produce the remaining annotations.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError
from .formats import CATEGORY_RUNWAY, InstanceAnnotation


@dataclass
class CanonicalRect:
    """Top-view runway rectangle with corners (0,0), (W,0), (W,L), (0,L)."""

    width: float = 100.0
    length: float = 400.0

    def __post_init__(self):
        if self.width <= 0 or self.length <= 0:
            raise GeometryError("canonical rectangle sides must be positive")

    def corners(self) -> np.ndarray:
        w, l = self.width, self.length
        return np.array([[0.0, 0.0], [w, 0.0], [w, l], [0.0, l]])


@dataclass
class ProportionModel:
    """Per-category marking polygons as fractions of the canonical frame."""

    fractions: dict = field(default_factory=dict)  # category_id -> [(n,2) arrays]

    def categories(self) -> list:
        return sorted(self.fractions)


# ---------------------------------------------------------------------------
# homography estimation and application
# ---------------------------------------------------------------------------

def _collinear_triple(pts: np.ndarray) -> bool:
    scale = max(1.0, float(np.abs(pts).max()))
    for i in range(4):
        for j in range(i + 1, 4):
            for k in range(j + 1, 4):
                v1 = pts[j] - pts[i]
                v2 = pts[k] - pts[i]
                if abs(v1[0] * v2[1] - v1[1] * v2[0]) <= 1e-9 * scale * scale:
                    return True
    return False


def _normalization(pts: np.ndarray) -> np.ndarray:
    center = pts.mean(axis=0)
    dist = np.hypot(*(pts - center).T).mean()
    s = np.sqrt(2.0) / dist if dist > 0 else 1.0
    return np.array([[s, 0.0, -s * center[0]],
                     [0.0, s, -s * center[1]],
                     [0.0, 0.0, 1.0]])


def homography_from_correspondences(src, dst) -> np.ndarray:
    """Exact 4-point direct linear transform with coordinate normalization.

    Returns the 3x3 matrix mapping each source point onto its destination,
    normalized so the bottom-right entry is 1.
    """
    s = np.asarray(src, dtype=np.float64).reshape(4, 2)
    d = np.asarray(dst, dtype=np.float64).reshape(4, 2)
    if _collinear_triple(s) or _collinear_triple(d):
        raise GeometryError("degenerate correspondences")
    ts, td = _normalization(s), _normalization(d)
    sn = (ts @ np.column_stack([s, np.ones(4)]).T).T[:, :2]
    dn = (td @ np.column_stack([d, np.ones(4)]).T).T[:, :2]
    a = np.zeros((8, 9))
    for i in range(4):
        x, y = sn[i]
        u, v = dn[i]
        a[2 * i] = [-x, -y, -1, 0, 0, 0, u * x, u * y, u]
        a[2 * i + 1] = [0, 0, 0, -x, -y, -1, v * x, v * y, v]
    _, _, vt = np.linalg.svd(a)
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(td) @ hn @ ts
    if abs(np.linalg.det(h)) <= 1e-12:
        raise GeometryError("degenerate correspondences")
    if abs(h[2, 2]) <= 1e-12:
        raise GeometryError("degenerate correspondences")
    return h / h[2, 2]


def apply_homography(h, points) -> np.ndarray:
    """Projective transform of (n, 2) points with perspective division."""
    matrix = np.asarray(h, dtype=np.float64).reshape(3, 3)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    hom = np.column_stack([pts, np.ones(len(pts))]) @ matrix.T
    w = hom[:, 2]
    if np.any(np.abs(w) <= 1e-12):
        raise GeometryError("point at infinity")
    return hom[:, :2] / w[:, None]


# ---------------------------------------------------------------------------
# runway corner ordering
# ---------------------------------------------------------------------------

def order_runway_quad(points) -> np.ndarray:
    """Canonical corner order for a runway quadrilateral in image coordinates.

    Corners are sorted counter-clockwise as seen in the image (rows grow
    downward) starting from the corner nearest the quadrilateral's own
    bottom-left, so the first edge is the runway's near end. This order
    corresponds one-to-one with ``CanonicalRect.corners()``.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if pts.shape != (4, 2):
        raise GeometryError("runway must be quadrilateral")
    if len(np.unique(pts, axis=0)) != 4 or _collinear_triple(pts):
        raise GeometryError("degenerate runway quadrilateral")
    center = pts.mean(axis=0)
    ang = np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0])
    order = np.argsort(-ang, kind="stable")
    ring = pts[order]
    anchor = np.array([pts[:, 0].min(), pts[:, 1].max()])
    start = int(np.argmin(((ring - anchor) ** 2).sum(axis=1)))
    return np.roll(ring, -start, axis=0)


# ---------------------------------------------------------------------------
# stage 1: derive the proportion model
# ---------------------------------------------------------------------------

def derive_proportions(reference, rect: CanonicalRect | None = None) -> ProportionModel:
    """Build a proportion model from one fully annotated reference image.

    The reference must contain a 4-vertex runway polygon plus at least one
    other category. Every non-runway polygon is warped into the canonical
    rectangle and stored as fractions of its width and length.
    """
    rect = rect or CanonicalRect()
    runway = [a for a in reference if a.category_id == CATEGORY_RUNWAY]
    if not runway:
        raise GeometryError("reference has no runway annotation")
    others = [a for a in reference if a.category_id != CATEGORY_RUNWAY]
    if not others:
        raise GeometryError("reference has no categories to derive")
    quad = runway[0].segmentation[0]
    if len(quad) != 4:
        raise GeometryError("runway must be quadrilateral")
    h = homography_from_correspondences(order_runway_quad(quad), rect.corners())
    scale = np.array([rect.width, rect.length])
    model = ProportionModel()
    for ann in others:
        for poly in ann.segmentation:
            frac = apply_homography(h, poly) / scale
            if frac.min() < -0.5 or frac.max() > 1.5:
                raise GeometryError(
                    f"annotation {ann.id} falls outside the rectified runway frame")
            model.fractions.setdefault(ann.category_id, []).append(frac)
    from .formats import CATEGORY_AIMING

    if CATEGORY_AIMING in model.fractions and len(model.fractions[CATEGORY_AIMING]) != 2:
        raise GeometryError("aiming marking must consist of exactly two strips")
    return model


# ---------------------------------------------------------------------------
# stage 2: propagate to a runway-only image
# ---------------------------------------------------------------------------

def propagate(runway_polygon, model: ProportionModel, rect: CanonicalRect | None = None,
              image_id: int = 0, group_id: int | None = None) -> list:
    """Produce full annotations for an image given only its runway polygon.

    Each stored marking polygon becomes its own instance (the two aiming
    strips stay separate instances). The returned list starts with the input
    runway annotation.
    """
    rect = rect or CanonicalRect()
    quad = np.asarray(runway_polygon, dtype=np.float64).reshape(-1, 2)
    if len(quad) != 4:
        raise GeometryError("runway must be quadrilateral")
    h = homography_from_correspondences(rect.corners(), order_runway_quad(quad))
    scale = np.array([rect.width, rect.length])
    out = [InstanceAnnotation(id=1, image_id=image_id, category_id=CATEGORY_RUNWAY,
                              segmentation=[quad], group_id=group_id)]
    next_id = 2
    for cat in model.categories():
        for frac in model.fractions[cat]:
            poly = apply_homography(h, frac * scale)
            out.append(InstanceAnnotation(
                id=next_id, image_id=image_id, category_id=cat,
                segmentation=[poly], group_id=group_id))
            next_id += 1
    return out
