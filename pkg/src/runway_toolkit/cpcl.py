"""Contour point constraint scoring for fixed-size predicted contours.

Contour-prediction heads emit a fixed number of boundary points (128 is
typical); a regular shape needs only its corners. The loss counts the
Douglas-Peucker key points of the predicted contour and applies a smooth-L1
penalty on the gap to the annotated corner count.
"""

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError
from . import geometry


@dataclass
class CpclConfig:
    dp_tolerance: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.dp_tolerance <= 0:
            raise GeometryError("dp_tolerance must be positive")
        if self.beta <= 0:
            raise GeometryError("beta must be positive")


def key_point_count(contour, tolerance: float = 1.0) -> int:
    """Number of points surviving closed-curve Douglas-Peucker refinement."""
    pts = contour.points if isinstance(contour, geometry.Contour) else \
        np.asarray(contour, dtype=np.float64).reshape(-1, 2)
    return len(geometry.simplify_polyline(pts, tolerance, closed=True))


def smooth_l1(delta: float, beta: float = 1.0) -> float:
    if beta <= 0:
        raise GeometryError("beta must be positive")
    delta = float(delta)
    if abs(delta) < beta:
        return 0.5 * delta * delta / beta
    return abs(delta) - 0.5 * beta


def cpcl_loss(contour, gt_corner_count: int, config: CpclConfig | None = None) -> float:
    """Smooth-L1 penalty on (key point count - annotated corner count)."""
    config = config or CpclConfig()
    if gt_corner_count < 3:
        raise GeometryError("degenerate ground-truth polygon")
    count = key_point_count(contour, config.dp_tolerance)
    return smooth_l1(count - gt_corner_count, config.beta)
