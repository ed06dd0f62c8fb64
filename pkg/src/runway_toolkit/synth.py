"""Seeded synthetic scene generator for desk-scale fixtures.

Each scene projects a canonical runway layout (runway, threshold marking, two
aiming strips) through a random landing-view homography into the image frame.
The clean manifest holds the projected polygons as ground truth; the noisy
manifest holds predictions: the traced contours of rasterized masks whose
boundaries were displaced by zero-mean noise. Clean and noisy annotations
share ids so scenes can be paired instance by instance.
"""

from dataclasses import dataclass

import numpy as np

from .errors import FormatError, GeometryError
from . import geometry
from .annotate import CanonicalRect, apply_homography, homography_from_correspondences
from .formats import (CATEGORY_AIMING, CATEGORY_RUNWAY, CATEGORY_THRESHOLD,
                      DatasetManifest, ImageInfo, InstanceAnnotation,
                      default_categories)

# marking polygons as fractions of the canonical rectangle (width, length);
# length fraction 0 is the runway near end
_LAYOUT = {
    CATEGORY_THRESHOLD: [np.array(
        [[0.15, 0.04], [0.85, 0.04], [0.85, 0.10], [0.15, 0.10]])],
    CATEGORY_AIMING: [
        np.array([[0.12, 0.24], [0.32, 0.24], [0.32, 0.36], [0.12, 0.36]]),
        np.array([[0.68, 0.24], [0.88, 0.24], [0.88, 0.36], [0.68, 0.36]]),
    ],
}

_MIN_INSTANCE_PIXELS = 16


@dataclass
class SyntheticSceneSpec:
    seed: int
    count: int
    noise_sigma: float = 2.0
    frame: tuple[int, int] = (1920, 1080)
    full_fraction: float = 0.8  # share of scenes carrying all three categories

    def __post_init__(self):
        if self.count < 1:
            raise FormatError("count must be >= 1")
        if self.noise_sigma < 0:
            raise FormatError("noise_sigma must be >= 0")
        if not 0 <= self.full_fraction <= 1:
            raise FormatError("full_fraction must be in [0, 1]")


@dataclass
class MaskEntry:
    """Instance mask cropped to its window; offset is the window origin."""

    mask: np.ndarray
    offset: tuple[int, int]


def _scene_quad(rng, width: int, height: int) -> np.ndarray:
    """Random landing-view runway quadrilateral, corners ordered to match
    CanonicalRect.corners(): near-left, near-right, far-right, far-left."""
    for _ in range(32):
        y_b = rng.uniform(0.80, 0.95) * height
        y_t = rng.uniform(0.20, 0.40) * height
        hw_b = rng.uniform(0.13, 0.26) * width
        hw_t = hw_b * rng.uniform(0.30, 0.55)
        x_cb = rng.uniform(0.40, 0.60) * width
        x_ct = x_cb + rng.uniform(-0.07, 0.07) * width
        quad = np.array([
            [x_cb - hw_b, y_b],
            [x_cb + hw_b, y_b],
            [x_ct + hw_t, y_t],
            [x_ct - hw_t, y_t],
        ])
        quad += rng.normal(0.0, 0.004 * width, size=(4, 2))
        if quad[:, 0].min() < 4 or quad[:, 0].max() > width - 4:
            continue
        if quad[:, 1].min() < 4 or quad[:, 1].max() > height - 4:
            continue
        if _convex(quad):
            return quad
    raise GeometryError("could not place a runway quadrilateral in the frame")


def _convex(quad: np.ndarray) -> bool:
    sign = 0
    for i in range(4):
        a, b, c = quad[i], quad[(i + 1) % 4], quad[(i + 2) % 4]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        s = 1 if cross > 0 else -1
        if sign == 0:
            sign = s
        elif s != sign:
            return False
    return True


def _densify(poly: np.ndarray, spacing: float) -> np.ndarray:
    pieces = []
    for i in range(len(poly)):
        a = poly[i]
        b = poly[(i + 1) % len(poly)]
        steps = max(1, int(np.ceil(np.hypot(*(b - a)) / spacing)))
        t = np.arange(steps) / steps
        pieces.append(a + t[:, None] * (b - a))
    return np.vstack(pieces)


def _boundary_noise(rng, n: int, sigma: float) -> np.ndarray:
    raw = rng.normal(0.0, 1.0, n)
    window = 5
    kernel = np.ones(window) / window
    padded = np.concatenate([raw[-(window // 2):], raw, raw[:window // 2]])
    smooth = np.convolve(padded, kernel, mode="valid")
    std = smooth.std()
    if std > 1e-12:
        smooth = smooth / std
    return np.clip(smooth * sigma, -3 * sigma, 3 * sigma)


def _noisy_instance(rng, poly: np.ndarray, sigma: float, frame: tuple[int, int]):
    """Rasterize the polygon with boundary noise; returns (mask window, offset,
    traced noisy polygon) or None when the instance is too small to keep."""
    width, height = frame
    margin = int(np.ceil(4 + 3 * sigma))
    x0 = max(0, int(np.floor(poly[:, 0].min())) - margin)
    y0 = max(0, int(np.floor(poly[:, 1].min())) - margin)
    x1 = min(width, int(np.ceil(poly[:, 0].max())) + margin)
    y1 = min(height, int(np.ceil(poly[:, 1].max())) + margin)
    if x1 <= x0 or y1 <= y0:
        return None
    clean = geometry.rasterize_polygons_window([poly], x0, y0, x1 - x0, y1 - y0)
    if np.count_nonzero(clean) < _MIN_INSTANCE_PIXELS:
        return None
    if sigma == 0:
        mask = clean
    else:
        dense = _densify(poly, 1.5)
        disp = _boundary_noise(rng, len(dense), sigma)
        nxt = np.roll(dense, -1, axis=0)
        prv = np.roll(dense, 1, axis=0)
        tang = nxt - prv
        norm = np.hypot(tang[:, 0], tang[:, 1])
        norm[norm < 1e-12] = 1.0
        outward = np.column_stack([tang[:, 1], -tang[:, 0]]) / norm[:, None]
        if geometry.signed_area(poly) < 0:
            outward = -outward
        noisy_poly = dense + disp[:, None] * outward
        mask = geometry.rasterize_polygons_window(
            [noisy_poly], x0, y0, x1 - x0, y1 - y0)
        if not mask.any():
            mask = clean
    contours = geometry.trace_contours(mask)
    largest = max(contours, key=lambda c: abs(geometry.signed_area(c.points)))
    if len(largest.points) < 3:
        return None
    traced = largest.points + np.array([x0, y0], dtype=np.float64)
    return mask, (x0, y0), traced


def generate_synthetic_corpus(spec: SyntheticSceneSpec):
    """Generate (clean manifest, noisy manifest, mask archive) from a seed.

    Deterministic: scene ``i`` depends only on ``(spec.seed, i)`` and the
    noise settings, so corpora of different sizes share their prefix.
    """
    width, height = spec.frame
    if width < 64 or height < 48:
        raise FormatError("frame too small to contain layout")
    rect = CanonicalRect()
    clean = DatasetManifest(categories=default_categories())
    noisy = DatasetManifest(categories=default_categories())
    masks: dict[int, MaskEntry] = {}
    next_ann = 1
    for i in range(spec.count):
        rng = np.random.default_rng([spec.seed, i])
        image = ImageInfo(id=i + 1, file_name=f"scene_{i:05d}.png",
                          width=width, height=height)
        clean.images.append(image)
        noisy.images.append(image)
        quad = _scene_quad(rng, width, height)
        full = rng.random() < spec.full_fraction
        h = homography_from_correspondences(rect.corners(), quad)
        scale = np.array([rect.width, rect.length])
        instances = [(CATEGORY_RUNWAY, quad)]
        if full:
            for cat in (CATEGORY_THRESHOLD, CATEGORY_AIMING):
                for frac in _LAYOUT[cat]:
                    instances.append((cat, apply_homography(h, frac * scale)))
        for cat, poly in instances:
            result = _noisy_instance(rng, poly, spec.noise_sigma, spec.frame)
            score = float(rng.uniform(0.5, 1.0))
            if result is None:
                continue
            mask, offset, traced = result
            clean.annotations.append(InstanceAnnotation(
                id=next_ann, image_id=image.id, category_id=cat,
                segmentation=[poly.copy()], group_id=i + 1))
            noisy.annotations.append(InstanceAnnotation(
                id=next_ann, image_id=image.id, category_id=cat,
                segmentation=[traced], score=score, group_id=i + 1))
            masks[next_ann] = MaskEntry(mask=mask, offset=offset)
            next_ann += 1
    return clean.validate(), noisy.validate(), masks
