"""Annotation and mask file formats: COCO JSON, LabelMe JSON, binary PGM.

Category ids are fixed: runway=1, threshold_marking=2, aiming_marking=3.
Segmentations are polygons only; RLE-encoded masks are rejected. Polygon
coordinates round-trip losslessly through JSON (shortest-repr floats).
"""

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError
from .geometry import signed_area

log = logging.getLogger("runway_toolkit")

CATEGORY_RUNWAY = 1
CATEGORY_THRESHOLD = 2
CATEGORY_AIMING = 3

DEFAULT_CATEGORIES = (
    (CATEGORY_RUNWAY, "runway"),
    (CATEGORY_THRESHOLD, "threshold_marking"),
    (CATEGORY_AIMING, "aiming_marking"),
)

DEFAULT_LABEL_MAP = {
    "runway": CATEGORY_RUNWAY,
    "threshold": CATEGORY_THRESHOLD,
    "threshold_marking": CATEGORY_THRESHOLD,
    "aiming": CATEGORY_AIMING,
    "aiming_marking": CATEGORY_AIMING,
}


@dataclass
class ImageInfo:
    id: int
    file_name: str
    width: int
    height: int


@dataclass
class CategoryInfo:
    id: int
    name: str


@dataclass
class InstanceAnnotation:
    """One instance: a category plus one or more closed polygons.

    ``area`` defaults to the total shoelace area of the polygons. ``score``
    is present on predictions only.
    """

    id: int
    image_id: int
    category_id: int
    segmentation: list  # list of (n, 2) float64 arrays
    area: float | None = None
    score: float | None = None
    group_id: int | None = None

    def __post_init__(self):
        polys = []
        for poly in self.segmentation:
            p = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
            if len(p) < 3:
                raise FormatError(f"annotation {self.id}: degenerate polygon")
            if not np.isfinite(p).all():
                raise FormatError(f"annotation {self.id}: non-finite coordinates")
            polys.append(p)
        if not polys:
            raise FormatError(f"annotation {self.id}: no polygons")
        self.segmentation = polys
        if self.area is None:
            self.area = float(sum(abs(signed_area(p)) for p in polys))
        if self.area <= 0:
            raise FormatError(f"annotation {self.id}: area must be positive")
        if self.score is not None and not 0 <= self.score <= 1:
            raise FormatError(f"annotation {self.id}: score must be in [0, 1]")


@dataclass
class DatasetManifest:
    images: list = field(default_factory=list)
    categories: list = field(default_factory=list)
    annotations: list = field(default_factory=list)

    def image_by_id(self) -> dict:
        return {im.id: im for im in self.images}

    def validate(self):
        _check_unique([im.id for im in self.images], "image")
        _check_unique([c.id for c in self.categories], "category")
        _check_unique([a.id for a in self.annotations], "annotation")
        image_ids = {im.id for im in self.images}
        category_ids = {c.id for c in self.categories}
        for ann in self.annotations:
            if ann.image_id not in image_ids:
                raise FormatError(
                    f"annotation {ann.id} references unknown image id {ann.image_id}")
            if ann.category_id not in category_ids:
                raise FormatError(
                    f"annotation {ann.id} references unknown category id {ann.category_id}")
        return self


def _check_unique(ids, what):
    seen = set()
    for i in ids:
        if i in seen:
            raise FormatError(f"duplicate {what} id {i}")
        seen.add(i)


def default_categories() -> list:
    return [CategoryInfo(cid, name) for cid, name in DEFAULT_CATEGORIES]


# ---------------------------------------------------------------------------
# COCO
# ---------------------------------------------------------------------------

def _flatten(poly: np.ndarray) -> list:
    return [float(v) for v in np.asarray(poly, dtype=np.float64).ravel()]


def read_coco(path) -> DatasetManifest:
    """Read a COCO-style JSON file with polygon segmentations."""
    with open(path, "rb") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(
                f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: "
                f"{exc.msg}") from None
    for key in ("images", "annotations", "categories"):
        if key not in data or not isinstance(data[key], list):
            raise FormatError(f"{path}: missing '{key}' array")
    manifest = DatasetManifest()
    for im in data["images"]:
        manifest.images.append(ImageInfo(
            id=int(im["id"]), file_name=str(im["file_name"]),
            width=int(im["width"]), height=int(im["height"])))
    for cat in data["categories"]:
        manifest.categories.append(CategoryInfo(id=int(cat["id"]), name=str(cat["name"])))
    for ann in data["annotations"]:
        seg = ann.get("segmentation")
        if isinstance(seg, dict):
            raise FormatError(
                f"{path}: annotation {ann.get('id')}: RLE segmentation is not "
                f"supported, polygons only")
        if not isinstance(seg, list) or not seg:
            raise FormatError(f"{path}: annotation {ann.get('id')}: missing polygon list")
        polys = []
        for flat in seg:
            arr = np.asarray(flat, dtype=np.float64)
            if arr.ndim != 1 or len(arr) % 2 != 0 or len(arr) < 6:
                raise FormatError(
                    f"{path}: annotation {ann.get('id')}: polygon needs an even "
                    f"number of >= 6 coordinates")
            polys.append(arr.reshape(-1, 2))
        manifest.annotations.append(InstanceAnnotation(
            id=int(ann["id"]), image_id=int(ann["image_id"]),
            category_id=int(ann["category_id"]), segmentation=polys,
            area=float(ann["area"]) if "area" in ann else None,
            score=float(ann["score"]) if "score" in ann else None,
            group_id=int(ann["group_id"]) if "group_id" in ann else None))
    return manifest.validate()


def manifest_to_dict(manifest: DatasetManifest) -> dict:
    out = {
        "images": [
            {"id": im.id, "file_name": im.file_name,
             "width": im.width, "height": im.height}
            for im in manifest.images
        ],
        "annotations": [],
        "categories": [{"id": c.id, "name": c.name} for c in manifest.categories],
    }
    for ann in manifest.annotations:
        entry = {
            "id": ann.id,
            "image_id": ann.image_id,
            "category_id": ann.category_id,
            "segmentation": [_flatten(p) for p in ann.segmentation],
            "area": float(ann.area),
            "iscrowd": 0,
        }
        if ann.score is not None:
            entry["score"] = float(ann.score)
        if ann.group_id is not None:
            entry["group_id"] = int(ann.group_id)
        out["annotations"].append(entry)
    return out


def write_coco(manifest: DatasetManifest, path):
    manifest.validate()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest_to_dict(manifest), fh, separators=(",", ":"))
        fh.write("\n")


# ---------------------------------------------------------------------------
# LabelMe
# ---------------------------------------------------------------------------

@dataclass
class LabelmeImage:
    file_name: str
    width: int
    height: int
    annotations: list  # InstanceAnnotation with image_id = 0 placeholder


def read_labelme(path, label_map: dict | None = None) -> LabelmeImage:
    """Read one LabelMe JSON file into per-image annotations.

    Polygon shapes become instances via the label -> category map; other
    shape types are skipped with a warning.
    """
    label_map = label_map if label_map is not None else DEFAULT_LABEL_MAP
    with open(path, "rb") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(
                f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: "
                f"{exc.msg}") from None
    try:
        width = int(data["imageWidth"])
        height = int(data["imageHeight"])
        shapes = data["shapes"]
    except KeyError as exc:
        raise FormatError(f"{path}: missing LabelMe field {exc}") from None
    annotations = []
    next_id = 1
    for shape in shapes:
        kind = shape.get("shape_type", "polygon")
        label = shape.get("label", "")
        if kind != "polygon":
            log.warning("%s: skipping non-polygon shape %r (%s)", path, label, kind)
            continue
        if label not in label_map:
            raise FormatError(f"{path}: unknown label {label!r} with no mapping")
        pts = np.asarray(shape["points"], dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
            raise FormatError(f"{path}: shape {label!r}: degenerate polygon")
        annotations.append(InstanceAnnotation(
            id=next_id, image_id=0, category_id=int(label_map[label]),
            segmentation=[pts]))
        next_id += 1
    return LabelmeImage(
        file_name=str(data.get("imagePath", path)), width=width, height=height,
        annotations=annotations)


# ---------------------------------------------------------------------------
# PGM masks
# ---------------------------------------------------------------------------

def write_pgm(mask, path, offset=(0, 0)):
    """Binary P5 graymap, 0=background 255=foreground, offset in a comment."""
    m = np.asarray(mask).astype(bool)
    header = f"P5\n# offset {int(offset[0])} {int(offset[1])}\n{m.shape[1]} {m.shape[0]}\n255\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write((m.astype(np.uint8) * 255).tobytes())


def read_pgm(path):
    """Read a binary P5 graymap; returns (bool mask, (x, y) offset)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(b"P5"):
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    offset = (0, 0)
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b"#":
            end = blob.index(b"\n", pos)
            comment = blob[pos + 1:end].split()
            if len(comment) == 3 and comment[0] == b"offset":
                offset = (int(comment[1]), int(comment[2]))
            pos = end + 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        tokens.append(blob[start:pos])
    width, height, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise FormatError(f"{path}: expected maxval 255, got {maxval}")
    pos += 1  # single whitespace after maxval
    if len(blob) - pos < width * height:
        raise FormatError(f"{path}: truncated pixel data")
    pixels = np.frombuffer(blob, dtype=np.uint8, count=width * height, offset=pos)
    return (pixels.reshape(height, width) > 127), offset
