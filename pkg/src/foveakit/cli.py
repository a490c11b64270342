"""Command-line interface.

Subcommands:

* ``warp``   -- render an image through the transform (or back).
* ``boxes``  -- reproject COCO annotations into the transformed space.
* ``search`` -- grid-search transform parameters over an annotation set.
* ``eval``   -- distance-binned detection metrics for COCO GT + results.
* ``bench``  -- timing/iteration statistics for the box transforms.
* ``points`` -- raw array-in/array-out transform over JSON, for pipelines
  and language bindings.

Exit codes: 0 success, 1 internal or solver failure, 2 usage/input error.
Report-producing subcommands also render a PNG figure next to their
delimited output unless ``--no-figures`` is given.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import boxes as boxmod
from . import search as searchmod
from .evaluate import (
    BIN_LABELS,
    CAMERA_PRESETS,
    CameraSpec,
    ClassHeightTable,
    estimate_distance,
    evaluate as evaluate_detections,
    load_annotations,
    load_results,
    write_report_csv,
)
from .errors import (
    ConvergenceError,
    EmptyInputError,
    FoveaKitError,
    InvalidParamsError,
    SchemaError,
    ShapeError,
    UnknownClassError,
)
from .geometry import FoveationParams, forward_map_batch, inverse_batch
from .imageio import read_image, write_image
from .warp import ImageBuffer, build_inverse_grid, unwarp_image, warp_image

__all__ = ["main"]


class UsageError(ValueError):
    """Bad flag combination or unreadable input; maps to exit code 2."""


# ---------------------------------------------------------------------------
# Shared argument plumbing


def _add_params_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group(
        "transform parameters",
        "either --params FILE or inline flags; giving both is an error")
    group.add_argument("--params", metavar="FILE",
                       help="JSON file with keys ox, oy, R, alpha, p")
    group.add_argument("--alpha", type=float, default=None,
                       help="contraction strength (default 2.0)")
    group.add_argument("--p", type=float, default=None, dest="blend_exp",
                       help="blend exponent (default 2.0)")
    group.add_argument("--R", type=float, default=None, dest="radius",
                       help="blend radius; 0 disables the transform (default 1.0)")
    group.add_argument("--origin", default=None, metavar="OX,OY",
                       help="transform origin in [-1,1]^2 (default 0,0)")


def _resolve_params(args: argparse.Namespace) -> FoveationParams:
    inline = [args.alpha, args.blend_exp, args.radius, args.origin]
    if args.params is not None:
        if any(v is not None for v in inline):
            raise UsageError(
                "--params and inline parameter flags are mutually exclusive")
        path = Path(args.params)
        if not path.exists():
            raise UsageError(f"parameter file not found: {path}")
        return FoveationParams.from_json(path.read_text())
    ox, oy = _parse_pair(args.origin or "0,0", "--origin")
    return FoveationParams(
        ox=ox, oy=oy,
        radius=1.0 if args.radius is None else args.radius,
        alpha=2.0 if args.alpha is None else args.alpha,
        blend_exp=2.0 if args.blend_exp is None else args.blend_exp)


def _parse_pair(text: str, flag: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise UsageError(f"{flag} expects 'x,y', got {text!r}")
    return float(parts[0]), float(parts[1])


def _parse_grid(text: str, flag: str) -> tuple[float, ...]:
    """Either 'a,b,c' or 'start:stop:step' (stop inclusive)."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"{flag} range expects start:stop:step, got {text!r}")
        start, stop, step = (float(v) for v in parts)
        if step <= 0:
            raise UsageError(f"{flag} step must be > 0")
        n = int(round((stop - start) / step))
        values = tuple(start + step * k for k in range(n + 1)
                       if start + step * k <= stop + 1e-12)
        return values
    return tuple(float(v) for v in text.split(","))


def _require_file(path_str: str, what: str) -> Path:
    path = Path(path_str)
    if not path.is_file():
        raise UsageError(f"{what} not found: {path}")
    return path


def _camera_from_args(args: argparse.Namespace) -> CameraSpec:
    if args.focal is not None and args.camera is not None:
        raise UsageError("--camera and --focal are mutually exclusive")
    if args.focal is not None:
        return CameraSpec(args.focal)
    return CameraSpec.from_preset(args.camera or "truckdrive")


def _figure_path(out_path: Path) -> Path:
    return out_path.with_suffix(".png")


# ---------------------------------------------------------------------------
# COCO box helpers (pixel <-> normalized center form)


def _load_coco_with_dims(path: Path) -> dict:
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: top level must be an object")
    for key in ("images", "annotations"):
        if key not in data:
            raise SchemaError(f"{path}: missing key {key!r}")
    dims = {}
    for i, img in enumerate(data["images"]):
        if "id" not in img or "width" not in img or "height" not in img:
            raise SchemaError(
                f"{path}: images[{i}] needs id, width and height")
        if img["width"] <= 0 or img["height"] <= 0:
            raise SchemaError(f"{path}: images[{i}] has non-positive dims")
        dims[img["id"]] = (int(img["width"]), int(img["height"]))
    data["_dims"] = dims
    return data


def _bbox_to_normalized(bbox, dims) -> np.ndarray:
    x, y, w, h = (float(v) for v in bbox)
    W, H = dims
    return np.array([2.0 * (x + w / 2.0) / W - 1.0,
                     2.0 * (y + h / 2.0) / H - 1.0,
                     2.0 * w / W, 2.0 * h / H])


def _normalized_to_bbox(row, dims) -> list[float]:
    cx, cy, w, h = (float(v) for v in row)
    W, H = dims
    px_w = w * W / 2.0
    px_h = h * H / 2.0
    px_cx = (cx + 1.0) * W / 2.0
    px_cy = (cy + 1.0) * H / 2.0
    return [px_cx - px_w / 2.0, px_cy - px_h / 2.0, px_w, px_h]


def _annotation_boxes_normalized(data: dict, path: Path) -> np.ndarray:
    rows = []
    for i, ann in enumerate(data["annotations"]):
        if "bbox" not in ann or "image_id" not in ann:
            raise SchemaError(f"{path}: annotations[{i}] needs bbox and image_id")
        if ann["image_id"] not in data["_dims"]:
            raise SchemaError(
                f"{path}: annotations[{i}] references unknown image {ann['image_id']}")
        rows.append(_bbox_to_normalized(ann["bbox"], data["_dims"][ann["image_id"]]))
    return np.asarray(rows, dtype=np.float64).reshape(-1, 4)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_warp(args: argparse.Namespace) -> int:
    src_path = _require_file(args.input, "input image")
    params = _resolve_params(args)
    src = read_image(src_path)

    if args.downsample and args.downsample_first:
        src = _resize(src, args.downsample)

    t0 = time.perf_counter()
    if args.inverse:
        # forward sampling needs no per-pixel solve, hence no grid build
        grid_ms = None
        t1 = time.perf_counter()
        out = unwarp_image(src, params)
        resample_ms = (time.perf_counter() - t1) * 1e3
    else:
        grid = build_inverse_grid(src.width, src.height, params, tol=args.tol)
        grid_ms = (time.perf_counter() - t0) * 1e3
        failed = grid.failed_pixels()
        if failed:
            print(f"warning: {len(failed)} grid pixels failed to converge",
                  file=sys.stderr)
        t1 = time.perf_counter()
        out = warp_image(src, grid)
        resample_ms = (time.perf_counter() - t1) * 1e3

    if args.downsample and not args.downsample_first:
        out = _resize(out, args.downsample)

    write_image(out, args.output)
    grid_note = "skipped" if grid_ms is None else f"{grid_ms:.2f} ms"
    print(f"grid build: {grid_note}, resample: {resample_ms:.2f} ms")
    print(f"wrote {args.output}")
    return 0


def _resize(buf: ImageBuffer, spec: str) -> ImageBuffer:
    from PIL import Image

    parts = spec.lower().split("x")
    if len(parts) != 2:
        raise UsageError(f"--downsample expects WxH, got {spec!r}")
    w, h = int(parts[0]), int(parts[1])
    data = np.clip(np.rint(buf.data * 255.0), 0, 255).astype(np.uint8)
    img = Image.fromarray(data[:, :, 0] if buf.channels == 1 else data)
    img = img.resize((w, h), Image.BILINEAR)
    return ImageBuffer(np.asarray(img, dtype=np.float64) / 255.0)


def cmd_boxes(args: argparse.Namespace) -> int:
    path = _require_file(args.annotations, "annotation file")
    params = _resolve_params(args)
    data = _load_coco_with_dims(path)

    if args.inverse:
        for i, ann in enumerate(data["annotations"]):
            if "riemannian" not in ann:
                raise SchemaError(
                    f"{path}: annotations[{i}] has no 'riemannian' field to invert")
        proj = np.asarray([ann["riemannian"] for ann in data["annotations"]],
                          dtype=np.float64).reshape(-1, 4)
        rows, _, converged = boxmod.boxes_to_euclidean(
            proj, params, tol=args.tol)
        if not np.all(converged):
            raise ConvergenceError(
                "box inversion failed for annotation indices "
                f"{tuple(np.flatnonzero(~converged))}")
        for ann, row in zip(data["annotations"], rows):
            dims = data["_dims"][ann["image_id"]]
            ann["bbox"] = _normalized_to_bbox(row, dims)
            ann.pop("riemannian", None)
            ann.pop("amplification", None)
    else:
        arr = _annotation_boxes_normalized(data, path)
        proj = boxmod.boxes_to_riemannian(arr, params)
        amp = boxmod.area_amplification(arr, params) if arr.size else np.zeros(0)
        for ann, row, a in zip(data["annotations"], proj, amp):
            ann["riemannian"] = [float(v) for v in row]
            ann["amplification"] = float(a)

    data.pop("_dims", None)
    Path(args.out).write_text(json.dumps(data, indent=2))
    print(f"wrote {args.out} ({len(data['annotations'])} annotations)")
    return 0


def cmd_search(args: argparse.Namespace) -> int:
    path = _require_file(args.annotations, "annotation file")
    data = _load_coco_with_dims(path)
    arr = _annotation_boxes_normalized(data, path)
    if arr.shape[0] == 0:
        raise EmptyInputError(f"{path}: no annotations to search over")

    spec = searchmod.SearchSpec(
        alpha_grid=_parse_grid(args.alpha_grid, "--alpha-grid"),
        p_grid=_parse_grid(args.p_grid, "--p-grid"),
        origin_grid=tuple(_parse_pair(s, "--origin-grid")
                          for s in args.origin_grid.split(";")),
        r_grid=_parse_grid(args.r_grid, "--r-grid"))

    score_fn = None
    if args.bin_weights is not None:
        weights = tuple(float(v) for v in args.bin_weights.split(","))
        camera = _camera_from_args(args)
        heights = ClassHeightTable.default()
        cat_names = {c["id"]: c["name"] for c in data.get("categories", [])}
        distances = []
        for i, ann in enumerate(data["annotations"]):
            if ann.get("category_id") not in cat_names:
                raise SchemaError(
                    f"{path}: annotations[{i}] has no known category for "
                    "distance weighting")
            distances.append(estimate_distance(
                float(ann["bbox"][3]), cat_names[ann["category_id"]],
                heights, camera))
        score_fn = (lambda boxes_arr, prm:
                    searchmod.weighted_objective(boxes_arr, distances, prm,
                                                 weights))

    result = searchmod.grid_search(arr, spec, kind=args.objective,
                                   workers=args.threads, score_fn=score_fn)
    out_path = Path(args.out)
    searchmod.write_table_csv(result, out_path)
    best_path = Path(args.best_out) if args.best_out else out_path.with_suffix(".best.json")
    best_path.write_text(result.best.to_json())
    if not args.no_figures:
        from .report import save_search_figure
        save_search_figure(result, _figure_path(out_path))
    print(f"best: alpha={result.best.alpha:g} p={result.best.blend_exp:g} "
          f"origin=({result.best.ox:g},{result.best.oy:g}) R={result.best.radius:g} "
          f"objective={result.objective:.6f}")
    print(f"wrote {out_path} and {best_path}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    gt_path = _require_file(args.gt, "ground-truth file")
    pred_path = _require_file(args.pred, "prediction file")
    camera = _camera_from_args(args)
    heights = ClassHeightTable.default()
    if args.heights:
        heights = ClassHeightTable(
            json.loads(_require_file(args.heights, "height table").read_text()))
    dataset = load_annotations(gt_path, heights, camera)
    preds = load_results(pred_path, dataset, heights, camera)
    report = evaluate_detections(dataset.gts, preds, dataset.categories)

    out_path = Path(args.out)
    write_report_csv(report, out_path, method_label=args.label)
    if args.json:
        Path(args.json).write_text(json.dumps(report.to_dict(), indent=2))
    if not args.no_figures:
        from .report import save_eval_figure
        save_eval_figure(report, _figure_path(out_path))

    print(f"mAP {report.coco_map:.4f} | "
          + " | ".join(f"{label} {v:.4f}" for label, v in
                       zip(BIN_LABELS, report.bin_maps))
          + f" | mAP50 {report.pascal50:.4f} | mAP75 {report.pascal75:.4f}")
    print(f"wrote {out_path}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    params = _resolve_params(args)
    rng = np.random.default_rng(args.seed)
    n = args.boxes * args.batch
    arr = np.column_stack([
        rng.uniform(-1.0, 1.0, size=n),
        rng.uniform(-1.0, 1.0, size=n),
        rng.uniform(0.02, 0.3, size=n),
        rng.uniform(0.02, 0.3, size=n),
    ])

    def timed(fn) -> tuple[np.ndarray, object]:
        times = np.empty(args.runs)
        out = None
        for i in range(args.runs):
            t0 = time.perf_counter()
            out = fn()
            times[i] = (time.perf_counter() - t0) * 1e3
        return times, out

    fwd_times, proj = timed(lambda: boxmod.boxes_to_riemannian(arr, params))

    damped_times, damped_out = timed(lambda: boxmod.boxes_to_euclidean(
        proj, params, tol=args.tol, max_iter=200, method="fixed_point"))
    newton_times, newton_out = timed(lambda: boxmod.boxes_to_euclidean(
        proj, params, tol=args.tol, max_iter=25, method="newton"))

    rows = [
        {"stage": "forward (to transformed space)",
         "mean_ms": float(fwd_times.mean()), "std_ms": float(fwd_times.std()),
         "mean_iterations": 0.0},
        {"stage": "inverse damped-residual",
         "mean_ms": float(damped_times.mean()),
         "std_ms": float(damped_times.std()),
         "mean_iterations": float(damped_out[1].mean())},
        {"stage": "inverse newton",
         "mean_ms": float(newton_times.mean()),
         "std_ms": float(newton_times.std()),
         "mean_iterations": float(newton_out[1].mean())},
    ]
    print(f"shape: {args.boxes} boxes x batch {args.batch} x {args.runs} runs, "
          f"tol {args.tol:g}")
    for row in rows:
        iters = (f", mean iterations {row['mean_iterations']:.2f}"
                 if row["mean_iterations"] else " (closed form, 0 iterations)")
        print(f"  {row['stage']}: {row['mean_ms']:.3f} +- {row['std_ms']:.3f} ms"
              + iters)

    if args.out:
        import csv as _csv

        out_path = Path(args.out)
        with open(out_path, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["stage", "mean_ms", "std_ms", "mean_iterations"])
            for row in rows:
                writer.writerow([row["stage"], f"{row['mean_ms']:.6f}",
                                 f"{row['std_ms']:.6f}",
                                 f"{row['mean_iterations']:.4f}"])
        if not args.no_figures:
            from .report import save_bench_figure
            save_bench_figure(rows, _figure_path(out_path))
        print(f"wrote {out_path}")
    return 0


def _json_safe(values) -> list:
    return [None if not np.isfinite(v) else float(v) for v in values]


def cmd_points(args: argparse.Namespace) -> int:
    params = _resolve_params(args)
    if args.input == "-":
        payload = json.load(sys.stdin)
    else:
        payload = json.loads(_require_file(args.input, "input file").read_text())
    if not isinstance(payload, dict) or ("points" not in payload) == ("boxes" not in payload):
        raise SchemaError("input must be an object with exactly one of "
                          "'points' (N x 2) or 'boxes' (N x 4)")

    def restore_nonfinite(raw, arr):
        # JSON has no NaN; nulls mark non-finite slots on both directions.
        for i, row in enumerate(raw):
            for j, v in enumerate(row):
                if v is None:
                    arr[i, j] = np.nan
        return arr

    if "points" in payload:
        raw = payload["points"]
        pts = restore_nonfinite(raw, np.asarray(
            [[0.0 if v is None else v for v in row] for row in raw],
            dtype=np.float64).reshape(-1, 2))
        if args.inverse:
            res = inverse_batch(pts, params, method=args.method, eta=args.eta,
                                tol=args.tol, max_iter=args.max_iter)
            out = {"points": [_json_safe(row) for row in res.solutions],
                   "iterations": [int(v) for v in res.iterations],
                   "converged": [bool(v) for v in res.converged]}
        else:
            mapped = forward_map_batch(pts, params)
            out = {"points": [_json_safe(row) for row in mapped]}
    else:
        raw = payload["boxes"]
        arr = restore_nonfinite(raw, np.asarray(
            [[0.0 if v is None else v for v in row] for row in raw],
            dtype=np.float64).reshape(-1, 4))
        if args.inverse:
            rows, iters, conv = boxmod.boxes_to_euclidean(
                arr, params, tol=args.tol, max_iter=args.max_iter,
                method=args.method)
            out = {"boxes": [_json_safe(row) for row in rows],
                   "iterations": [int(v) for v in iters],
                   "converged": [bool(v) for v in conv]}
        else:
            out = {"boxes": [_json_safe(row)
                             for row in boxmod.boxes_to_riemannian(arr, params)]}

    text = json.dumps(out)
    if args.output == "-":
        sys.stdout.write(text + "\n")
    else:
        Path(args.output).write_text(text)
    return 0


# ---------------------------------------------------------------------------
# Parser assembly


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="foveakit",
        description="Radial foveation transforms for images, boxes and metrics")
    sub = parser.add_subparsers(dest="command", required=True)

    p_warp = sub.add_parser("warp", help="resample an image through the transform")
    p_warp.add_argument("--input", required=True)
    p_warp.add_argument("--output", required=True)
    p_warp.add_argument("--inverse", action="store_true",
                        help="undo a previously applied warp")
    p_warp.add_argument("--tol", type=float, default=1e-8)
    p_warp.add_argument("--downsample", default=None, metavar="WxH",
                        help="resize the result (or, with --downsample-first, "
                             "the input) to WxH")
    p_warp.add_argument("--downsample-first", action="store_true")
    _add_params_args(p_warp)
    p_warp.set_defaults(fn=cmd_warp)

    p_boxes = sub.add_parser("boxes", help="reproject COCO annotation boxes")
    p_boxes.add_argument("--annotations", required=True)
    p_boxes.add_argument("--out", required=True)
    p_boxes.add_argument("--inverse", action="store_true",
                         help="recover bbox fields from 'riemannian' fields")
    p_boxes.add_argument("--tol", type=float, default=1e-10)
    _add_params_args(p_boxes)
    p_boxes.set_defaults(fn=cmd_boxes)

    p_search = sub.add_parser("search", help="grid-search transform parameters")
    p_search.add_argument("--annotations", required=True)
    p_search.add_argument("--out", required=True, help="CSV table output")
    p_search.add_argument("--best-out", default=None,
                          help="JSON output for the winning parameters")
    p_search.add_argument("--alpha-grid", default="0.5:4.0:0.25")
    p_search.add_argument("--p-grid", default="0.5:4.0:0.25")
    p_search.add_argument("--r-grid", default="1.0")
    p_search.add_argument("--origin-grid", default="0,0",
                          help="semicolon-separated ox,oy pairs")
    p_search.add_argument("--objective", default="amplification",
                          choices=searchmod.OBJECTIVE_KINDS)
    p_search.add_argument("--bin-weights", default=None, metavar="W0,W1,W2,W3",
                          help="weight the objective by distance bin")
    p_search.add_argument("--camera", default=None,
                          choices=sorted(CAMERA_PRESETS))
    p_search.add_argument("--focal", type=float, default=None)
    p_search.add_argument("--threads", type=int, default=1)
    p_search.add_argument("--no-figures", action="store_true")
    p_search.set_defaults(fn=cmd_search)

    p_eval = sub.add_parser("eval", help="distance-binned detection metrics")
    p_eval.add_argument("--gt", required=True)
    p_eval.add_argument("--pred", required=True)
    p_eval.add_argument("--out", required=True, help="CSV report output")
    p_eval.add_argument("--json", default=None, help="also write JSON report")
    p_eval.add_argument("--label", default="predictions")
    p_eval.add_argument("--camera", default=None,
                        choices=sorted(CAMERA_PRESETS))
    p_eval.add_argument("--focal", type=float, default=None)
    p_eval.add_argument("--heights", default=None,
                        help="JSON file overriding the class-height table")
    p_eval.add_argument("--no-figures", action="store_true")
    p_eval.set_defaults(fn=cmd_eval)

    p_bench = sub.add_parser("bench", help="box transform timing benchmark")
    p_bench.add_argument("--boxes", type=int, default=100)
    p_bench.add_argument("--batch", type=int, default=4)
    p_bench.add_argument("--runs", type=int, default=50)
    p_bench.add_argument("--tol", type=float, default=1e-6)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", default=None, help="optional CSV output")
    p_bench.add_argument("--no-figures", action="store_true")
    _add_params_args(p_bench)
    p_bench.set_defaults(fn=cmd_bench)

    p_points = sub.add_parser(
        "points", help="transform raw point/box arrays (JSON in, JSON out)")
    p_points.add_argument("--input", required=True,
                          help="JSON file or '-' for stdin")
    p_points.add_argument("--output", default="-",
                          help="JSON file or '-' for stdout")
    p_points.add_argument("--inverse", action="store_true")
    p_points.add_argument("--method", default="newton",
                          choices=["newton", "fixed_point"])
    p_points.add_argument("--tol", type=float, default=1e-8)
    p_points.add_argument("--max-iter", type=int, default=None)
    p_points.add_argument("--eta", type=float, default=1.0)
    _add_params_args(p_points)
    p_points.set_defaults(fn=cmd_points)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "max_iter", 0) is None:
        args.max_iter = 25 if args.method == "newton" else 200
    try:
        return args.fn(args)
    except (UsageError, SchemaError, UnknownClassError, InvalidParamsError,
            EmptyInputError, ShapeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    except FoveaKitError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
