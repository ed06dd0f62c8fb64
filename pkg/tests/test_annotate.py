import numpy as np
import pytest

from runway_toolkit.annotate import (CanonicalRect, apply_homography,
                                     derive_proportions,
                                     homography_from_correspondences,
                                     order_runway_quad, propagate)
from runway_toolkit.errors import GeometryError
from runway_toolkit.formats import (CATEGORY_AIMING, CATEGORY_RUNWAY,
                                    CATEGORY_THRESHOLD, InstanceAnnotation)

LAYOUT = {
    CATEGORY_THRESHOLD: [np.array([[.15, .04], [.85, .04], [.85, .10], [.15, .10]])],
    CATEGORY_AIMING: [
        np.array([[.12, .24], [.32, .24], [.32, .36], [.12, .36]]),
        np.array([[.68, .24], [.88, .24], [.88, .36], [.68, .36]]),
    ],
}


def random_view_quad(rng, width=1920, height=1080):
    y_b = rng.uniform(0.78, 0.95) * height
    y_t = rng.uniform(0.24, 0.50) * height
    hw_b = rng.uniform(0.15, 0.30) * width
    hw_t = hw_b * rng.uniform(0.30, 0.60)
    x_cb = rng.uniform(0.38, 0.62) * width
    x_ct = x_cb + rng.uniform(-0.08, 0.08) * width
    return np.array([[x_cb - hw_b, y_b], [x_cb + hw_b, y_b],
                     [x_ct + hw_t, y_t], [x_ct - hw_t, y_t]])


def scene_annotations(quad, rect=None):
    rect = rect or CanonicalRect()
    h = homography_from_correspondences(rect.corners(), quad)
    scale = np.array([rect.width, rect.length])
    anns = [InstanceAnnotation(1, 1, CATEGORY_RUNWAY, [quad])]
    next_id = 2
    for cat, polys in LAYOUT.items():
        for frac in polys:
            anns.append(InstanceAnnotation(
                next_id, 1, cat, [apply_homography(h, frac * scale)]))
            next_id += 1
    return anns


class TestHomography:
    def test_identity(self):
        quad = np.array([[0, 0], [10, 0], [10, 5], [0, 5]], dtype=float)
        h = homography_from_correspondences(quad, quad)
        assert np.allclose(h, np.eye(3), atol=1e-9)

    def test_translation(self):
        quad = np.array([[0, 0], [10, 0], [10, 5], [0, 5]], dtype=float)
        h = homography_from_correspondences(quad, quad + [5, 7])
        expected = np.array([[1, 0, 5], [0, 1, 7], [0, 0, 1]], dtype=float)
        assert np.allclose(h, expected, atol=1e-9)

    def test_perspective_reprojection(self):
        src = np.array([[420.0, 950.0], [1480.0, 940.0],
                        [1160.0, 380.0], [720.0, 390.0]])
        dst = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        h = homography_from_correspondences(src, dst)
        assert np.abs(apply_homography(h, src) - dst).max() <= 1e-9

    def test_random_exactness(self):
        rng = np.random.default_rng(21)
        worst = 0.0
        for _ in range(200):
            src = _well_spread_quad(rng)
            dst = _well_spread_quad(rng)
            h = homography_from_correspondences(src, dst)
            worst = max(worst, float(np.abs(apply_homography(h, src) - dst).max()))
        assert worst <= 1e-9

    def test_collinear_rejected(self):
        src = np.array([[0, 0], [1, 1], [2, 2], [0, 5]], dtype=float)
        dst = np.array([[0, 0], [10, 0], [10, 5], [0, 5]], dtype=float)
        with pytest.raises(GeometryError, match="degenerate correspondences"):
            homography_from_correspondences(src, dst)

    def test_normalized_bottom_right(self):
        rng = np.random.default_rng(22)
        h = homography_from_correspondences(_well_spread_quad(rng),
                                            _well_spread_quad(rng))
        assert h[2, 2] == 1.0


class TestApplyHomography:
    def test_identity(self):
        pts = np.array([[1.5, 2.5], [3.0, -1.0]])
        assert np.array_equal(apply_homography(np.eye(3), pts), pts)

    def test_inverse_round_trip(self):
        rng = np.random.default_rng(23)
        h = homography_from_correspondences(_well_spread_quad(rng),
                                            _well_spread_quad(rng))
        pts = rng.uniform(100, 400, (20, 2))
        back = apply_homography(np.linalg.inv(h), apply_homography(h, pts))
        assert np.abs(back - pts).max() <= 1e-9

    def test_translation_arithmetic(self):
        h = np.array([[1, 0, 5], [0, 1, 7], [0, 0, 1]], dtype=float)
        assert apply_homography(h, [[1, 2]]).tolist() == [[6, 9]]

    def test_point_at_infinity(self):
        h = np.array([[1, 0, 0], [0, 1, 0], [1, 0, 0]], dtype=float)
        with pytest.raises(GeometryError, match="point at infinity"):
            apply_homography(h, [[0.0, 5.0]])


class TestOrderRunwayQuad:
    def test_landing_view_order(self):
        quad = np.array([[300.0, 900.0], [1600.0, 900.0],
                         [1200.0, 300.0], [700.0, 300.0]])
        for perm in ([0, 1, 2, 3], [2, 0, 3, 1], [3, 2, 1, 0], [1, 3, 0, 2]):
            ordered = order_runway_quad(quad[perm])
            assert np.array_equal(ordered, quad)

    def test_rejects_non_quad(self):
        with pytest.raises(GeometryError, match="runway must be quadrilateral"):
            order_runway_quad(np.zeros((3, 2)))

    def test_rejects_degenerate(self):
        with pytest.raises(GeometryError):
            order_runway_quad(np.array([[0, 0], [1, 0], [2, 0], [3, 0.0]]))


class TestDeriveProportions:
    def test_axis_aligned_reference_stores_raw_offsets(self):
        # Axis-aligned runway at canonical coordinates. In image coordinates
        # rows grow downward, so the near end sits at the bottom (y = length)
        # and stored fractions measure from the near end.
        rect = CanonicalRect(width=100, length=400)
        quad = rect.corners()
        threshold = LAYOUT[CATEGORY_THRESHOLD][0] * [100, 400]
        anns = [InstanceAnnotation(1, 1, CATEGORY_RUNWAY, [quad]),
                InstanceAnnotation(2, 1, CATEGORY_THRESHOLD, [threshold])]
        model = derive_proportions(anns, rect)
        expected = LAYOUT[CATEGORY_THRESHOLD][0] * [1, -1] + [0, 1]
        assert np.abs(model.fractions[CATEGORY_THRESHOLD][0] - expected).max() <= 1e-9

    def test_synthetic_projection_recovery(self):
        rng = np.random.default_rng(24)
        for _ in range(10):
            quad = random_view_quad(rng)
            model = derive_proportions(scene_annotations(quad))
            for cat, polys in LAYOUT.items():
                for got, expected in zip(model.fractions[cat], polys):
                    assert np.abs(got - expected).max() <= 1e-6

    def test_runway_only_error(self):
        quad = random_view_quad(np.random.default_rng(25))
        anns = [InstanceAnnotation(1, 1, CATEGORY_RUNWAY, [quad])]
        with pytest.raises(GeometryError, match="no categories to derive"):
            derive_proportions(anns)

    def test_missing_runway_error(self):
        anns = [InstanceAnnotation(1, 1, CATEGORY_THRESHOLD,
                                   [np.array([[0, 0], [5, 0], [5, 5], [0, 5.0]])])]
        with pytest.raises(GeometryError, match="no runway"):
            derive_proportions(anns)

    def test_non_quadrilateral_runway_error(self):
        poly = np.array([[0, 0], [10, 0], [12, 5], [10, 10], [0, 10.0]])
        anns = [InstanceAnnotation(1, 1, CATEGORY_RUNWAY, [poly]),
                InstanceAnnotation(2, 1, CATEGORY_THRESHOLD,
                                   [np.array([[1, 1], [3, 1], [3, 3], [1, 3.0]])])]
        with pytest.raises(GeometryError, match="runway must be quadrilateral"):
            derive_proportions(anns)


class TestPropagate:
    def test_round_trip_on_reference(self):
        rng = np.random.default_rng(26)
        quad = random_view_quad(rng)
        reference = scene_annotations(quad)
        model = derive_proportions(reference)
        out = propagate(quad, model)
        by_cat = {}
        for ann in out[1:]:
            by_cat.setdefault(ann.category_id, []).append(ann.segmentation[0])
        for ref_ann in reference[1:]:
            candidates = by_cat[ref_ann.category_id]
            err = min(np.abs(c - ref_ann.segmentation[0]).max() for c in candidates)
            assert err <= 1e-6

    def test_two_view_propagation(self):
        rng = np.random.default_rng(27)
        for _ in range(10):
            quad_a = random_view_quad(rng)
            quad_b = random_view_quad(rng)
            model = derive_proportions(scene_annotations(quad_a))
            truth = scene_annotations(quad_b)
            out = propagate(quad_b, model)
            for got, expected in zip(out[1:], truth[1:]):
                assert got.category_id == expected.category_id
                assert np.abs(got.segmentation[0]
                              - expected.segmentation[0]).max() <= 0.5

    def test_rect_choice_is_immaterial(self):
        rng = np.random.default_rng(28)
        quad_a = random_view_quad(rng)
        quad_b = random_view_quad(rng)
        rect1 = CanonicalRect(width=100, length=400)
        rect2 = CanonicalRect(width=37.5, length=1210.0)
        model1 = derive_proportions(scene_annotations(quad_a), rect1)
        model2 = derive_proportions(scene_annotations(quad_a), rect2)
        out1 = propagate(quad_b, model1, rect1)
        out2 = propagate(quad_b, model2, rect2)
        for a, b in zip(out1, out2):
            assert np.abs(a.segmentation[0] - b.segmentation[0]).max() <= 1e-6

    def test_composition_consistency(self):
        rng = np.random.default_rng(29)
        quad_a = random_view_quad(rng)
        quad_b = random_view_quad(rng)
        quad_c = random_view_quad(rng)
        model = derive_proportions(scene_annotations(quad_a))
        direct = propagate(quad_c, model)
        via_b = propagate(quad_b, model)
        model_b = derive_proportions(via_b)
        indirect = propagate(quad_c, model_b)
        for a, b in zip(direct, indirect):
            assert np.abs(a.segmentation[0] - b.segmentation[0]).max() <= 1e-4

    def test_category_subset(self):
        rng = np.random.default_rng(30)
        quad = random_view_quad(rng)
        rect = CanonicalRect()
        h = homography_from_correspondences(rect.corners(), quad)
        anns = [InstanceAnnotation(1, 1, CATEGORY_RUNWAY, [quad]),
                InstanceAnnotation(2, 1, CATEGORY_THRESHOLD,
                                   [apply_homography(
                                       h, LAYOUT[CATEGORY_THRESHOLD][0] * [100, 400])])]
        model = derive_proportions(anns)
        out = propagate(quad, model)
        assert {a.category_id for a in out} == {CATEGORY_RUNWAY, CATEGORY_THRESHOLD}

    def test_aiming_strip_count_enforced(self):
        rng = np.random.default_rng(31)
        quad = random_view_quad(rng)
        rect = CanonicalRect()
        h = homography_from_correspondences(rect.corners(), quad)
        anns = [InstanceAnnotation(1, 1, CATEGORY_RUNWAY, [quad]),
                InstanceAnnotation(2, 1, CATEGORY_AIMING,
                                   [apply_homography(
                                       h, LAYOUT[CATEGORY_AIMING][0] * [100, 400])])]
        with pytest.raises(GeometryError, match="two strips"):
            derive_proportions(anns)


def _well_spread_quad(rng, lo=0.0, hi=512.0):
    while True:
        quad = rng.uniform(lo, hi, (4, 2))
        ok = True
        for i in range(4):
            for j in range(i + 1, 4):
                for k in range(j + 1, 4):
                    v1 = quad[j] - quad[i]
                    v2 = quad[k] - quad[i]
                    if abs(v1[0] * v2[1] - v1[1] * v2[0]) < 2000:
                        ok = False
        if ok:
            return quad
