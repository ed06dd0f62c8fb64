"""Toolkit for regular-shape (runway) instance segmentation: boundary
smoothing, smoothness/AP evaluation, contour key-point losses, and
homography-based annotation propagation."""

__version__ = "0.1.0"

from .errors import FormatError, GeometryError, ToolkitError
from .geometry import (Contour, Line2, centroid, fit_line_least_squares,
                       intersect_lines, mask_iou, morphological_open,
                       perimeter, rasterize_polygon, signed_area,
                       simplify_polyline, trace_contours)
from .spm import (CornerSet, SmoothResult, SpmConfig, adaptive_tolerance,
                  fit_quadrilateral, locate_corners, smooth_instance)
from .metrics import (EvalConfig, EvalReport, MatchSet, average_precision,
                      average_smoothness, evaluate, match_instances, pr_curve)
from .cpcl import CpclConfig, cpcl_loss, key_point_count, smooth_l1
from .annotate import (CanonicalRect, ProportionModel, apply_homography,
                       derive_proportions, homography_from_correspondences,
                       order_runway_quad, propagate)
from .formats import (DatasetManifest, ImageInfo, InstanceAnnotation,
                      read_coco, read_labelme, read_pgm, write_coco, write_pgm)
from .synth import SyntheticSceneSpec, generate_synthetic_corpus

__all__ = [name for name in dir() if not name.startswith("_")]
