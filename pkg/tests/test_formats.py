import json
import logging

import numpy as np
import pytest

from runway_toolkit.errors import FormatError
from runway_toolkit.formats import (CATEGORY_AIMING, CATEGORY_RUNWAY,
                                    DatasetManifest, ImageInfo,
                                    InstanceAnnotation, default_categories,
                                    read_coco, read_labelme, read_pgm,
                                    write_coco, write_pgm)
from runway_toolkit.geometry import signed_area


def sample_manifest():
    rng = np.random.default_rng(41)
    manifest = DatasetManifest(
        images=[ImageInfo(i + 1, f"img_{i}.png", 640, 480) for i in range(3)],
        categories=default_categories())
    ann_id = 1
    for image in manifest.images:
        for cat in (1, 2):
            poly = rng.uniform(10, 400, (5, 2))
            manifest.annotations.append(InstanceAnnotation(
                id=ann_id, image_id=image.id, category_id=cat,
                segmentation=[poly], score=float(rng.uniform(0, 1)),
                group_id=image.id))
            ann_id += 1
    return manifest


class TestCocoRoundTrip:
    def test_lossless(self, tmp_path):
        manifest = sample_manifest()
        path = tmp_path / "ds.json"
        write_coco(manifest, path)
        back = read_coco(path)
        assert len(back.images) == len(manifest.images)
        assert [c.name for c in back.categories] == \
            [c.name for c in manifest.categories]
        for a, b in zip(manifest.annotations, back.annotations):
            assert (a.id, a.image_id, a.category_id, a.group_id) == \
                (b.id, b.image_id, b.category_id, b.group_id)
            assert a.score == b.score
            assert a.area == b.area
            for pa, pb in zip(a.segmentation, b.segmentation):
                assert np.array_equal(pa, pb)

    def test_area_matches_shoelace(self, tmp_path):
        poly = np.array([[3, 2], [40, 7], [35, 60], [1, 50]], dtype=float)
        ann = InstanceAnnotation(1, 1, 1, [poly])
        assert ann.area == pytest.approx(abs(signed_area(poly)), abs=1e-6)
        manifest = DatasetManifest(images=[ImageInfo(1, "x.png", 64, 64)],
                                   categories=default_categories(),
                                   annotations=[ann])
        path = tmp_path / "a.json"
        write_coco(manifest, path)
        assert read_coco(path).annotations[0].area == ann.area

    def test_iscrowd_written(self, tmp_path):
        path = tmp_path / "c.json"
        write_coco(sample_manifest(), path)
        data = json.loads(path.read_text())
        assert all(a["iscrowd"] == 0 for a in data["annotations"])


class TestCocoValidation:
    def test_dangling_image_reference(self, tmp_path):
        manifest = sample_manifest()
        manifest.annotations[0].image_id = 99
        with pytest.raises(FormatError, match="99"):
            write_coco(manifest, tmp_path / "bad.json")

    def test_duplicate_ids(self, tmp_path):
        manifest = sample_manifest()
        manifest.annotations[1].id = manifest.annotations[0].id
        with pytest.raises(FormatError, match="duplicate annotation id"):
            write_coco(manifest, tmp_path / "bad.json")

    def test_malformed_json_positions(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"images": [\n  {"id": }\n]}')
        with pytest.raises(FormatError, match="line 2"):
            read_coco(path)

    def test_rle_rejected(self, tmp_path):
        path = tmp_path / "rle.json"
        path.write_text(json.dumps({
            "images": [{"id": 1, "file_name": "a.png", "width": 4, "height": 4}],
            "categories": [{"id": 1, "name": "runway"}],
            "annotations": [{"id": 1, "image_id": 1, "category_id": 1,
                             "segmentation": {"counts": "abc", "size": [4, 4]},
                             "area": 4}],
        }))
        with pytest.raises(FormatError, match="RLE"):
            read_coco(path)

    def test_short_polygon_rejected(self, tmp_path):
        path = tmp_path / "short.json"
        path.write_text(json.dumps({
            "images": [{"id": 1, "file_name": "a.png", "width": 4, "height": 4}],
            "categories": [{"id": 1, "name": "runway"}],
            "annotations": [{"id": 1, "image_id": 1, "category_id": 1,
                             "segmentation": [[0, 0, 1, 1]], "area": 1}],
        }))
        with pytest.raises(FormatError, match="even number"):
            read_coco(path)


class TestLabelme:
    def write_labelme(self, path, shapes):
        path.write_text(json.dumps({
            "imagePath": "img.png", "imageWidth": 1920, "imageHeight": 1080,
            "shapes": shapes,
        }))

    def test_single_runway(self, tmp_path):
        path = tmp_path / "one.json"
        self.write_labelme(path, [{
            "label": "runway", "shape_type": "polygon",
            "points": [[10, 10], [100, 12], [95, 80], [8, 78]],
        }])
        item = read_labelme(path)
        assert item.width == 1920 and item.height == 1080
        assert len(item.annotations) == 1
        assert item.annotations[0].category_id == CATEGORY_RUNWAY

    def test_degenerate_polygon(self, tmp_path):
        path = tmp_path / "two.json"
        self.write_labelme(path, [{
            "label": "runway", "shape_type": "polygon",
            "points": [[0, 0], [5, 5]],
        }])
        with pytest.raises(FormatError, match="degenerate polygon"):
            read_labelme(path)

    def test_two_aiming_instances(self, tmp_path):
        path = tmp_path / "aim.json"
        self.write_labelme(path, [
            {"label": "aiming", "shape_type": "polygon",
             "points": [[0, 0], [5, 0], [5, 5], [0, 5]]},
            {"label": "aiming", "shape_type": "polygon",
             "points": [[10, 0], [15, 0], [15, 5], [10, 5]]},
        ])
        item = read_labelme(path)
        assert [a.category_id for a in item.annotations] == \
            [CATEGORY_AIMING, CATEGORY_AIMING]

    def test_unknown_label(self, tmp_path):
        path = tmp_path / "unk.json"
        self.write_labelme(path, [{
            "label": "taxiway", "shape_type": "polygon",
            "points": [[0, 0], [5, 0], [5, 5], [0, 5]],
        }])
        with pytest.raises(FormatError, match="taxiway"):
            read_labelme(path)

    def test_non_polygon_skipped_with_warning(self, tmp_path, caplog):
        path = tmp_path / "mix.json"
        self.write_labelme(path, [
            {"label": "runway", "shape_type": "rectangle",
             "points": [[0, 0], [5, 5]]},
            {"label": "runway", "shape_type": "polygon",
             "points": [[0, 0], [5, 0], [5, 5], [0, 5]]},
        ])
        with caplog.at_level(logging.WARNING, logger="runway_toolkit"):
            item = read_labelme(path)
        assert len(item.annotations) == 1
        assert "skipping non-polygon" in caplog.text


class TestPgm:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(42)
        mask = rng.random((37, 53)) < 0.4
        path = tmp_path / "m.pgm"
        write_pgm(mask, path, offset=(120, 45))
        back, offset = read_pgm(path)
        assert np.array_equal(back, mask)
        assert offset == (120, 45)

    def test_not_pgm(self, tmp_path):
        path = tmp_path / "x.pgm"
        path.write_bytes(b"P6 1 1 255 \x00\x00\x00")
        with pytest.raises(FormatError, match="P5"):
            read_pgm(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n4 4\n255\n\x00\x00")
        with pytest.raises(FormatError, match="truncated"):
            read_pgm(path)
