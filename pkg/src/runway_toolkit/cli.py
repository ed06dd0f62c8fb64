"""Command-line interface exposing the smoothing, evaluation, CPCL scoring,
annotation propagation and fixture generation pipelines.

Exit codes: 0 success, 1 validation error, 2 I/O error. Set
``RUNWAY_TOOLKIT_THREADS`` to process instances with a bounded worker pool
(results stay in input order, so output is deterministic for any pool size).
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .errors import FormatError, ToolkitError
from . import annotate, formats, geometry, metrics, spm, synth


def _thread_count() -> int:
    raw = os.environ.get("RUNWAY_TOOLKIT_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise FormatError(f"RUNWAY_TOOLKIT_THREADS must be an integer, got {raw!r}")


def _map_ordered(func, items):
    threads = _thread_count()
    if threads == 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def _load_config(path, cls):
    if path is None:
        return cls()
    with open(path, "rb") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(
                f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: "
                f"{exc.msg}") from None
    if not isinstance(data, dict):
        raise FormatError(f"{path}: config must be a JSON object")
    known = set(cls.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise FormatError(f"{path}: unknown config keys {sorted(unknown)}")
    if "transversal_offsets" in data:
        data["transversal_offsets"] = tuple(data["transversal_offsets"])
    if "iou_thresholds" in data:
        data["iou_thresholds"] = tuple(data["iou_thresholds"])
    return cls(**data)


# ---------------------------------------------------------------------------
# smooth
# ---------------------------------------------------------------------------

def _cmd_smooth(args) -> int:
    manifest = formats.read_coco(args.pred)
    config = _load_config(args.config, spm.SpmConfig)
    frames = {im.id: (im.width, im.height) for im in manifest.images}

    def run(ann):
        w, h = frames[ann.image_id]
        mask = geometry.rasterize_polygons_window(ann.segmentation, 0, 0, w, h)
        result = spm.smooth_instance(mask, config)
        return ann, result

    counts = {spm.KIND_QUADRILATERAL: 0, spm.KIND_DP_FALLBACK: 0,
              spm.KIND_PASSTHROUGH: 0}
    out = formats.DatasetManifest(images=manifest.images,
                                  categories=manifest.categories)
    for ann, result in _map_ordered(run, manifest.annotations):
        counts[result.kind] += 1
        out.annotations.append(formats.InstanceAnnotation(
            id=ann.id, image_id=ann.image_id, category_id=ann.category_id,
            segmentation=[result.polygon.points], score=ann.score,
            group_id=ann.group_id))
    formats.write_coco(out, args.out)
    for kind in (spm.KIND_QUADRILATERAL, spm.KIND_DP_FALLBACK, spm.KIND_PASSTHROUGH):
        print(f"{kind}: {counts[kind]}")
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _fmt(value, scale=100.0):
    return "-" if value is None else f"{value * scale:.2f}"


def _print_report(report: metrics.EvalReport, categories):
    header = f"{'category':<20}" + "".join(
        f"{c:>8}" for c in ("AP", "AP50", "AP75", "APS", "APM", "APL", "AS"))
    print(header)
    rows = [("all", report.ap, report.ap50, report.ap75,
             report.ap_s, report.ap_m, report.ap_l, report.as_mean)]
    names = {c.id: c.name for c in categories}
    for cat_id in sorted(report.per_category):
        c = report.per_category[cat_id]
        rows.append((names.get(cat_id, str(cat_id)), c["ap"], c["ap50"], c["ap75"],
                     c["ap_s"], c["ap_m"], c["ap_l"], c["as_mean"]))
    for name, ap, ap50, ap75, ap_s, ap_m, ap_l, as_mean in rows:
        cells = [_fmt(ap), _fmt(ap50), _fmt(ap75), _fmt(ap_s), _fmt(ap_m),
                 _fmt(ap_l), _fmt(as_mean, scale=1.0)]
        print(f"{name:<20}" + "".join(f"{v:>8}" for v in cells))


def _cmd_eval(args) -> int:
    gt = formats.read_coco(args.gt)
    pred = formats.read_coco(args.pred)
    config = _load_config(args.config, metrics.EvalConfig)
    report = metrics.evaluate(gt, pred, config)
    _print_report(report, gt.categories)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=1)
            fh.write("\n")
        print(f"wrote {args.json}")
    return 0


# ---------------------------------------------------------------------------
# cpcl
# ---------------------------------------------------------------------------

def _largest_polygon(ann):
    return max(ann.segmentation, key=lambda p: abs(geometry.signed_area(p)))


def _cmd_cpcl(args) -> int:
    from . import cpcl as cpcl_mod
    from .metrics import _annotation_raster, _greedy_match, _raster_iou, _sorted_preds

    gt = formats.read_coco(args.gt)
    pred = formats.read_coco(args.pred)
    config = cpcl_mod.CpclConfig(dp_tolerance=args.tolerance, beta=args.beta)
    frames = {im.id: (im.width, im.height) for im in gt.images}
    for ann in pred.annotations:
        if ann.image_id not in frames:
            raise FormatError(
                f"prediction {ann.id} references unknown image id {ann.image_id}")
        if ann.score is None:
            raise FormatError(f"prediction {ann.id} has no score")

    pairs = []
    keys = sorted({(a.image_id, a.category_id) for a in pred.annotations})
    gt_by = {}
    for a in gt.annotations:
        gt_by.setdefault((a.image_id, a.category_id), []).append(a)
    pred_by = {}
    for a in pred.annotations:
        pred_by.setdefault((a.image_id, a.category_id), []).append(a)
    for key in keys:
        g = gt_by.get(key, [])
        p = _sorted_preds(pred_by[key])
        w, h = frames[key[0]]
        rg = [_annotation_raster(a, w, h) for a in g]
        rp = [_annotation_raster(a, w, h) for a in p]
        iou_mat = np.array([[_raster_iou(b, a) for a in rg] for b in rp],
                           dtype=np.float64).reshape(len(p), len(g))
        matches = _greedy_match(iou_mat, np.zeros(len(g), dtype=bool), 0.5)
        for d, ann in enumerate(p):
            if matches[d] >= 0:
                pairs.append((ann, g[matches[d]]))

    losses = []
    for ann, gt_ann in sorted(pairs, key=lambda pair: pair[0].id):
        count = cpcl_mod.key_point_count(_largest_polygon(ann), config.dp_tolerance)
        gt_count = len(_largest_polygon(gt_ann))
        loss = cpcl_mod.smooth_l1(count - gt_count, config.beta)
        losses.append(loss)
        print(f"ann {ann.id}: key_points={count} gt={gt_count} loss={loss:.6f}")
    print(f"matched {len(pairs)} of {len(pred.annotations)} predictions")
    if losses:
        print(f"mean_cpcl {float(np.mean(losses)):.6f}")
    else:
        print("mean_cpcl -")
    return 0


# ---------------------------------------------------------------------------
# propagate
# ---------------------------------------------------------------------------

def _cmd_propagate(args) -> int:
    reference = formats.read_labelme(args.ref)
    model = annotate.derive_proportions(reference.annotations)
    group_dir = Path(args.group)
    files = sorted(group_dir.glob("*.json"))
    if not files:
        raise FormatError(f"{args.group}: no LabelMe files in group directory")
    out = formats.DatasetManifest(categories=formats.default_categories())
    next_ann = 1
    for image_id, path in enumerate(files, start=1):
        item = formats.read_labelme(path)
        runway = [a for a in item.annotations
                  if a.category_id == formats.CATEGORY_RUNWAY]
        if not runway:
            raise FormatError(f"{path}: no runway annotation to propagate from")
        out.images.append(formats.ImageInfo(
            id=image_id, file_name=item.file_name,
            width=item.width, height=item.height))
        derived = annotate.propagate(runway[0].segmentation[0], model,
                                     image_id=image_id, group_id=1)
        for ann in derived:
            ann.id = next_ann
            next_ann += 1
            out.annotations.append(ann)
    formats.write_coco(out, args.out)
    print(f"derived {len(model.categories())} categories from {args.ref}")
    print(f"wrote {len(out.images)} images, {len(out.annotations)} annotations "
          f"to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# gen-fixtures
# ---------------------------------------------------------------------------

def _cmd_gen_fixtures(args) -> int:
    spec = synth.SyntheticSceneSpec(
        seed=args.seed, count=args.count, noise_sigma=args.noise,
        frame=_parse_frame(args.frame))
    clean, noisy, masks = synth.generate_synthetic_corpus(spec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    formats.write_coco(clean, out_dir / "clean.json")
    formats.write_coco(noisy, out_dir / "noisy.json")
    written = 0
    if args.masks:
        mask_dir = out_dir / "masks"
        mask_dir.mkdir(exist_ok=True)
        for ann_id in sorted(masks):
            entry = masks[ann_id]
            formats.write_pgm(entry.mask, mask_dir / f"mask_{ann_id:06d}.pgm",
                              offset=entry.offset)
            written += 1
    print(f"wrote clean.json ({len(clean.images)} images, "
          f"{len(clean.annotations)} annotations)")
    print(f"wrote noisy.json ({len(noisy.images)} images, "
          f"{len(noisy.annotations)} annotations)")
    print(f"wrote {written} masks")
    return 0


def _parse_frame(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise FormatError(f"frame must look like 1920x1080, got {text!r}")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="runway-toolkit",
        description="Smoothing, evaluation and annotation tools for "
                    "regular-shape instance segmentation")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("smooth", help="apply boundary smoothing to predictions")
    p.add_argument("--pred", required=True, help="COCO predictions (polygons)")
    p.add_argument("--out", required=True, help="output COCO file")
    p.add_argument("--config", default=None, help="JSON file with SpmConfig fields")
    p.set_defaults(func=_cmd_smooth)

    p = sub.add_parser("eval", help="COCO-style AP plus smoothness report")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--config", default=None, help="JSON file with EvalConfig fields")
    p.add_argument("--json", default=None, help="also write the report as JSON")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("cpcl", help="contour key-point losses for predictions")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--tolerance", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.set_defaults(func=_cmd_cpcl)

    p = sub.add_parser("propagate",
                       help="derive proportions from a reference and propagate "
                            "annotations over a group")
    p.add_argument("--ref", required=True, help="fully annotated LabelMe file")
    p.add_argument("--group", required=True,
                   help="directory of runway-only LabelMe files")
    p.add_argument("--out", required=True, help="output COCO file")
    p.set_defaults(func=_cmd_propagate)

    p = sub.add_parser("gen-fixtures", help="generate a seeded synthetic corpus")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--noise", type=float, default=2.0)
    p.add_argument("--out", required=True)
    p.add_argument("--frame", default="1920x1080")
    p.add_argument("--masks", action="store_true",
                   help="also write per-instance PGM masks")
    p.set_defaults(func=_cmd_gen_fixtures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    sys.exit(main())
