"""Raster and vector geometry primitives.

Coordinate conventions:
  * A binary mask is a 2-D bool array indexed ``mask[row, col]``.
  * In continuous coordinates the center of pixel ``(col, row)`` is the point
    ``(col + 0.5, row + 0.5)``; polygon vertices live in this continuous frame.
  * ``centroid`` alone reports pixel-index coordinates (the mean of the set
    pixel indices), matching the raster moments it is defined from.
  * Closed contours are oriented counter-clockwise in the mathematical sense
    of the raw ``(x, y)`` values, i.e. their shoelace area is positive.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError
from . import kernels


@dataclass
class Contour:
    """Ordered boundary polyline; ``closed`` contours wrap around.

    Traced single-pixel or one-pixel-wide shapes can yield degenerate closed
    contours with fewer than 3 points; well-formed polygons have at least 3.
    """

    points: np.ndarray  # (n, 2) float64
    closed: bool = True

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)


@dataclass
class Line2:
    """Line a*x + b*y = c with unit normal (a, b)."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        self.normal = np.asarray(self.normal, dtype=np.float64).reshape(2)
        norm = float(self.normal[0] ** 2 + self.normal[1] ** 2)
        if abs(norm - 1.0) > 1e-9:
            raise GeometryError("line normal must be a unit vector")


def as_mask(mask) -> np.ndarray:
    m = np.asarray(mask)
    if m.ndim != 2 or m.size == 0:
        raise GeometryError("mask must be a non-empty 2-D array")
    return m.astype(bool) if m.dtype != bool else m


def _polygon_points(polygon) -> np.ndarray:
    if isinstance(polygon, Contour):
        if not polygon.closed:
            raise GeometryError("not a closed polygon")
        return polygon.points
    return np.asarray(polygon, dtype=np.float64).reshape(-1, 2)


def signed_area(points: np.ndarray) -> float:
    """Shoelace area of a closed polygon (positive for counter-clockwise)."""
    p = np.asarray(points, dtype=np.float64)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def perimeter(points, closed: bool) -> float:
    """Total Euclidean length of the polyline, including the closing segment."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(p) < 2:
        raise GeometryError("degenerate polyline")
    seg = np.diff(p, axis=0)
    total = float(np.hypot(seg[:, 0], seg[:, 1]).sum())
    if closed:
        total += float(np.hypot(*(p[0] - p[-1])))
    return total


# ---------------------------------------------------------------------------
# raster operations
# ---------------------------------------------------------------------------

def morphological_open(mask, element_size: int = 3, repetitions: int = 1) -> np.ndarray:
    """Erode-then-dilate with a square element, repeated ``repetitions`` times.

    A size-1 element is the identity. Pixels outside the image count as
    background, so the result is always a subset of the input.
    """
    m = as_mask(mask)
    if element_size < 1 or element_size % 2 == 0:
        raise GeometryError("structuring element size must be odd and >= 1")
    if repetitions < 1:
        raise GeometryError("repetitions must be >= 1")
    if element_size == 1:
        return m.copy()
    buf = np.ascontiguousarray(m, dtype=np.uint8)
    for _ in range(repetitions):
        buf = kernels.dilate(kernels.erode(buf, element_size), element_size)
    return buf.astype(bool)


def centroid(mask) -> np.ndarray:
    """Center of mass (x, y) of the set pixels, in pixel-index coordinates."""
    m = as_mask(mask)
    rows, cols = np.nonzero(m)
    if len(rows) == 0:
        raise GeometryError("empty mask")
    return np.array([cols.mean(), rows.mean()])


def trace_contours(mask) -> list[Contour]:
    """Outer border of every 8-connected component, in raster discovery order.

    Border points are pixel centers ``(col + 0.5, row + 0.5)``. Holes are
    ignored. An empty mask yields an empty list.
    """
    m = as_mask(mask)
    if not m.any():
        return []
    labels, count = kernels.label_components(np.ascontiguousarray(m, dtype=np.uint8))
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    uniq, first = np.unique(flat[order], return_index=True)
    starts = {int(u): int(order[f]) for u, f in zip(uniq, first)}
    w = m.shape[1]
    contours = []
    for lid in range(1, count + 1):
        start = starts[lid]
        path = kernels.trace_border(labels, lid, start // w, start % w)
        pts = np.empty((len(path), 2), dtype=np.float64)
        pts[:, 0] = path[:, 1] + 0.5
        pts[:, 1] = path[:, 0] + 0.5
        if signed_area(pts) < 0:
            pts = np.vstack([pts[:1], pts[:0:-1]])
        contours.append(Contour(pts, closed=True))
    return contours


def rasterize_polygons_window(polygons, x_off: int, y_off: int,
                              width: int, height: int) -> np.ndarray:
    """Union raster of several polygons over a pixel window.

    Window pixel ``(i, j)`` corresponds to frame pixel ``(x_off + i, y_off + j)``;
    a pixel is set when its center lies inside (even-odd rule) or exactly on
    the boundary of any polygon.
    """
    out = np.zeros((height, width), dtype=np.uint8)
    if width <= 0 or height <= 0:
        return out.astype(bool)
    for poly in polygons:
        p = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
        nxt = np.roll(p, -1, axis=0)
        keep = (p != nxt).any(axis=1)
        if keep.sum() < 2:
            continue
        xa = np.ascontiguousarray(p[keep, 0])
        ya = np.ascontiguousarray(p[keep, 1])
        xb = np.ascontiguousarray(nxt[keep, 0])
        yb = np.ascontiguousarray(nxt[keep, 1])
        kernels.fill_polygon(xa, ya, xb, yb, float(x_off), float(y_off),
                             width, height, out)
    return out.astype(bool)


def rasterize_polygon(polygon, width: int, height: int) -> np.ndarray:
    """Scanline even-odd fill of a closed polygon, clipped to the frame."""
    pts = _polygon_points(polygon)
    if len(pts) < 3:
        raise GeometryError("not a closed polygon")
    if not np.isfinite(pts).all():
        raise GeometryError("not a closed polygon")
    if width < 1 or height < 1:
        raise GeometryError("frame dimensions must be positive")
    return rasterize_polygons_window([pts], 0, 0, width, height)


def mask_iou(a, b) -> float:
    """Intersection over union of two equally sized masks (0 when both empty)."""
    ma, mb = as_mask(a), as_mask(b)
    if ma.shape != mb.shape:
        raise GeometryError(f"mask dimensions differ: {ma.shape} vs {mb.shape}")
    union = int(np.count_nonzero(ma | mb))
    if union == 0:
        return 0.0
    inter = int(np.count_nonzero(ma & mb))
    return inter / union


# ---------------------------------------------------------------------------
# polyline simplification
# ---------------------------------------------------------------------------

def farthest_point_pair(points: np.ndarray) -> tuple[int, int]:
    """Indices (i < j) of the two mutually farthest points.

    Computed on the convex hull; ties resolve to the lexicographically
    smallest index pair.
    """
    p = np.asarray(points, dtype=np.float64)
    n = len(p)
    if n < 2:
        raise GeometryError("degenerate polyline")
    order = np.lexsort((p[:, 1], p[:, 0]))
    hull_local = kernels.convex_hull(np.ascontiguousarray(p[order]))
    cand = np.sort(order[hull_local])
    if len(cand) < 2:
        return 0, min(1, n - 1)
    sub = p[cand]
    diff = sub[:, None, :] - sub[None, :, :]
    d2 = (diff ** 2).sum(axis=2)
    best = d2.max()
    ii, jj = np.nonzero(d2 == best)
    pairs = sorted((int(cand[a]), int(cand[b])) for a, b in zip(ii, jj) if a < b)
    if not pairs:
        return 0, min(1, n - 1)
    return pairs[0]


def simplify_polyline(points, tolerance: float, closed: bool = False) -> np.ndarray:
    """Douglas-Peucker simplification; the result is a subsequence of the input.

    Points deviating more than ``tolerance`` from the local chord are kept.
    Closed input is split at its two mutually farthest points, each arc is
    simplified independently, and the arcs are rejoined.
    """
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = len(p)
    if n < 2:
        raise GeometryError("degenerate polyline")
    if tolerance < 0:
        raise GeometryError("tolerance must be >= 0")
    if not closed:
        keep = kernels.dp_keep_flags(np.ascontiguousarray(p), float(tolerance))
        return p[np.asarray(keep, dtype=bool)].copy()
    if n < 3:
        return p.copy()
    i, j = farthest_point_pair(p)
    if np.array_equal(p[i], p[j]):
        return p.copy()
    arc1 = np.ascontiguousarray(p[i:j + 1])
    arc2 = np.ascontiguousarray(np.vstack([p[j:], p[:i + 1]]))
    keep1 = np.asarray(kernels.dp_keep_flags(arc1, float(tolerance)), dtype=bool)
    keep2 = np.asarray(kernels.dp_keep_flags(arc2, float(tolerance)), dtype=bool)
    kept = set(np.nonzero(keep1)[0] + i)
    idx2 = np.concatenate([np.arange(j, n), np.arange(0, i + 1)])
    kept.update(idx2[np.nonzero(keep2)[0]])
    return p[sorted(kept)].copy()


# ---------------------------------------------------------------------------
# line fitting and intersection
# ---------------------------------------------------------------------------

def fit_line_least_squares(points) -> Line2:
    """Orthogonal (total) least-squares line through a point set.

    Minimizes the sum of squared perpendicular distances, so near-vertical
    edges fit as well as horizontal ones. The line passes through the
    centroid of the points.
    """
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(p) < 2:
        raise GeometryError("degenerate point set")
    mean = p.mean(axis=0)
    q = p - mean
    sxx = float(np.dot(q[:, 0], q[:, 0]))
    syy = float(np.dot(q[:, 1], q[:, 1]))
    sxy = float(np.dot(q[:, 0], q[:, 1]))
    spread = sxx + syy
    if spread <= 1e-18 * max(1.0, float(np.abs(p).max()) ** 2):
        raise GeometryError("degenerate point set")
    theta = 0.5 * math.atan2(2.0 * sxy, sxx - syy)  # major-axis direction
    a, b = -math.sin(theta), math.cos(theta)
    if a < 0 or (a == 0 and b < 0):
        a, b = -a, -b
    c = a * mean[0] + b * mean[1]
    return Line2(np.array([a, b]), float(c))


def intersect_lines(a: Line2, b: Line2) -> np.ndarray:
    """Intersection point of two non-parallel lines."""
    det = a.normal[0] * b.normal[1] - a.normal[1] * b.normal[0]
    if abs(det) <= 1e-9:
        raise GeometryError("parallel lines")
    x = (a.offset * b.normal[1] - b.offset * a.normal[1]) / det
    y = (a.normal[0] * b.offset - b.normal[0] * a.offset) / det
    return np.array([x, y])
