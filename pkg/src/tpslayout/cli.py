"""Command-line interface.

Maps are passed as path prefixes: ``room`` stands for ``room.edge.png`` and
``room.corner.png``.  Layout arguments accept either a maps prefix or a
``*.json`` RoomLayout.  A ``--config`` JSON/YAML file may set any flag (keys
use underscores, e.g. ``grid_side``) and any FitConfig field; flags given on
the command line win.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from . import fit as fitmod
from . import layout as lay
from . import metrics, postproc, synth
from .maps import WORKING_SIZE, LayoutMaps
from .tps import ControlGrid, SingularSystemError

log = logging.getLogger("tpslayout")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

DEFAULTS = {
    "mode": "cuboid",
    "grid_side": None,  # 4 for cuboid, 8 for noncuboid
    "alpha": None,
    "beta": None,
    "delta": None,
    "steps": None,
    "seed": 0,
    "unit_width": 75,
    "separator": 5,
    "threshold": 0.5,
    "resolution": None,
    "count": 10,
    "min_corners": None,
    "max_corners": None,
    "pair_tolerance": 10.0,
    "manhattan": False,
    "workers": 1,
}
_FIT_FLAGS = {"grid_side": "n_side", "alpha": "alpha", "beta": "beta", "delta": "delta",
              "steps": "steps", "seed": "seed"}


class UsageError(Exception):
    pass


# -- argument handling ---------------------------------------------------------


def parse_resolution(text) -> tuple[int, int]:
    if isinstance(text, (list, tuple)):
        w, h = (int(v) for v in text)
    else:
        try:
            w, h = (int(v) for v in str(text).lower().split("x"))
        except ValueError:
            raise UsageError(f"resolution must look like 1024x512, got {text!r}") from None
    if w <= 0 or h <= 0 or w % 2 or h % 2:
        raise UsageError(f"resolution must be positive and even in both dimensions, got {w}x{h}")
    return w, h


def _settings(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    s = dict(DEFAULTS)
    fit_extra = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise FileNotFoundError(f"missing config file: {path}")
        data = fitmod.load_mapping(path)
        fit_fields = set(fitmod.FitConfig.__dataclass_fields__)
        for k, v in data.items():
            key = k.replace("-", "_")
            if key in s:
                s[key] = v
            elif key in fit_fields:
                fit_extra[key] = v
            else:
                raise UsageError(f"{path}: unknown config key {k!r}")
    for k, v in vars(args).items():
        if k in s and v is not None:
            s[k] = v
    if s["mode"] not in ("cuboid", "noncuboid"):
        raise UsageError(f"mode must be cuboid or noncuboid, got {s['mode']!r}")
    if s["resolution"] is not None:
        s["resolution"] = parse_resolution(s["resolution"])
    s["fit_extra"] = fit_extra
    return s


def fit_config(s: dict) -> fitmod.FitConfig:
    d = dict(s.get("fit_extra", {}))
    for flag, name in _FIT_FLAGS.items():
        if s.get(flag) is not None:
            d[name] = s[flag]
    d.setdefault("n_side", 8 if s["mode"] == "noncuboid" else 4)
    try:
        return fitmod.FitConfig.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid fit configuration: {exc}") from None


def _prefix(path) -> Path:
    p = str(path)
    for suffix in (".edge.png", ".corner.png"):
        if p.endswith(suffix):
            return Path(p[: -len(suffix)])
    return Path(p)


def load_maps(path) -> LayoutMaps:
    return LayoutMaps.load(_prefix(path))


def load_layout(path, camera_height: float = lay.CAMERA_HEIGHT, threshold: float = 0.5,
                pair_tolerance: float = 10.0, strict: bool = True) -> lay.RoomLayout:
    if str(path).endswith(".json"):
        if not Path(path).is_file():
            raise FileNotFoundError(f"missing layout file: {path}")
        return lay.RoomLayout.load(path)
    return lay.maps_to_layout(load_maps(path), camera_height, threshold, pair_tolerance, strict)


def _is_corpus(path) -> bool:
    return path is not None and (Path(path) / "index.json").is_file()


def _write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _map_entries(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


# -- commands ------------------------------------------------------------------


def cmd_gen_reference(args, s) -> int:
    w, h = s["resolution"] or WORKING_SIZE
    out = lay.reference_layout(w, h).save(_prefix(args.output))
    lay.canonical_room().save(f"{_prefix(args.output)}.layout.json")
    log.info("reference maps written to %s", ", ".join(map(str, out)))
    return EXIT_OK


def cmd_synth(args, s) -> int:
    kind = "manhattan" if s["mode"] == "noncuboid" else "cuboid"
    lo = s["min_corners"] or (6 if kind == "manhattan" else 4)
    hi = s["max_corners"] or max(lo, 8 if kind == "manhattan" else 4)
    spec = synth.CorpusSpec(count=int(s["count"]), seed=int(s["seed"]), kind=kind, min_corners=int(lo),
                            max_corners=int(hi), resolution=s["resolution"] or WORKING_SIZE)
    manifest = synth.write_corpus(synth.generate(spec), spec, args.output)
    log.info("%d rooms written, manifest %s", spec.count, manifest)
    return EXIT_OK


def cmd_warp(args, s) -> int:
    maps = load_maps(args.input)
    path = Path(args.grid)
    if not path.is_file():
        raise FileNotFoundError(f"missing control grid: {path}")
    grid = ControlGrid.from_dict(json.loads(path.read_text()))
    fitmod.warp_maps(maps, grid, float(args.smoothing)).save(_prefix(args.output))
    return EXIT_OK


def _reference_for(args, target: LayoutMaps) -> LayoutMaps:
    if args.input:
        ref = load_maps(args.input)
        if ref.edge.shape != target.edge.shape:
            raise ValueError(f"{args.input}: reference is {ref.width}x{ref.height}, "
                             f"target is {target.width}x{target.height}")
        return ref
    return lay.reference_layout(target.width, target.height)


def fit_one(reference: LayoutMaps, target_prefix, out_prefix, cfg: fitmod.FitConfig) -> dict:
    target = load_maps(target_prefix)
    trace = fitmod.fit_tps(reference, target, cfg)
    out_prefix = _prefix(out_prefix)
    trace.warped.save(out_prefix)
    _write_json(f"{out_prefix}.grid.json", trace.grid.to_dict())
    trace.write_csv(f"{out_prefix}.loss.csv")
    return {"target": str(target_prefix), "output": str(out_prefix), "initial_loss": trace.initial_loss,
            "final_loss": trace.final_loss, "converged": trace.final_loss < cfg.loss_threshold}


def _fit_job(ref_prefix, target_prefix, out_prefix, cfg_dict):
    target = load_maps(target_prefix)
    ref = load_maps(ref_prefix) if ref_prefix else lay.reference_layout(target.width, target.height)
    return fit_one(ref, target_prefix, out_prefix, fitmod.FitConfig.from_dict(cfg_dict))


def cmd_fit(args, s) -> int:
    cfg = fit_config(s)
    if _is_corpus(args.target):
        entries = synth.read_manifest(args.target)["entries"]
        out = Path(args.output)
        jobs = [(args.input, Path(args.target) / e["id"], out / e["id"], cfg.to_dict()) for e in entries]
        rows = _map_entries(_fit_job, jobs, int(s["workers"]))
        _write_json(out / "fit_summary.json", {"config": cfg.to_dict(), "entries": rows})
    else:
        target = load_maps(args.target)
        rows = [fit_one(_reference_for(args, target), args.target, args.output, cfg)]
    for r in rows:
        log.info("%s: loss %.4g -> %.4g", r["target"], r["initial_loss"], r["final_loss"])
        if not r["converged"]:
            log.warning("%s: final loss %.4g above threshold %.4g", r["target"], r["final_loss"],
                        cfg.loss_threshold)
    return EXIT_OK


def _postprocess(maps: LayoutMaps, s) -> LayoutMaps:
    if s["mode"] != "noncuboid":
        return maps
    return postproc.split_corners(maps, int(s["unit_width"]), int(s["separator"]),
                                  threshold=float(s["threshold"]))


def cmd_postprocess(args, s) -> int:
    if Path(args.input).is_dir():
        src = Path(args.input)
        prefixes = sorted({_prefix(p) for p in src.glob("*.corner.png")})
        if not prefixes:
            raise FileNotFoundError(f"no maps found in {src}")
        for p in prefixes:
            _postprocess(load_maps(p), s).save(Path(args.output) / p.name)
        return EXIT_OK
    _postprocess(load_maps(args.input), s).save(_prefix(args.output))
    return EXIT_OK


def evaluate_one(pred_prefix, gt_path, s) -> metrics.MetricsReport:
    """Metrics of predicted maps against a GT maps prefix or layout JSON.

    The prediction is reconstructed leniently (unpaired blobs are dropped);
    a prediction with no usable corners scores zero IoU.
    """
    pred_maps = load_maps(pred_prefix)
    thr, tol = float(s["threshold"]), float(s["pair_tolerance"])
    if str(gt_path).endswith(".json"):
        gt_layout = lay.RoomLayout.load(gt_path)
        w, h = pred_maps.width, pred_maps.height
        gt_ann = lay.corner_annotation(gt_layout, w, h)
        gt_maps = lay.render_maps(gt_layout, w, h)
    else:
        gt_maps = load_maps(gt_path)
        gt_ann = lay.annotation_from_maps(gt_maps, thr, tol)
        gt_layout = lay.layout_from_annotation(gt_ann)
    pred_cls, gt_cls = metrics.class_raster(pred_maps.edge, thr), metrics.class_raster(gt_maps.edge, thr)
    try:
        pred_ann = lay.annotation_from_maps(pred_maps, thr, tol, strict=False, min_columns=3)
        if len(pred_ann) == 3:
            pred_ann = lay.complete_rectangle(pred_ann)
        pred_layout = lay.layout_from_annotation(pred_ann)
        if s["manhattan"]:
            pred_layout = lay.manhattan_regularize(pred_layout)
    except lay.LayoutError as exc:
        log.warning("%s: no layout recovered (%s)", pred_prefix, exc)
        return metrics.MetricsReport(0.0, 0.0, None, metrics.pixel_error(pred_cls, gt_cls))
    return metrics.report(pred_layout, gt_layout, pred_ann, gt_ann, pred_cls, gt_cls)


def _evaluate_job(pred, gt, s):
    return evaluate_one(pred, gt, s).to_dict()


def cmd_evaluate(args, s) -> int:
    if _is_corpus(args.gt):
        entries = synth.read_manifest(args.gt)["entries"]
        gt_dir, pred_dir = Path(args.gt), Path(args.pred)
        jobs = [(pred_dir / e["id"], gt_dir / e["layout"], s) for e in entries]
        rows = _map_entries(_evaluate_job, jobs, int(s["workers"]))
        for e, r in zip(entries, rows):
            r["id"] = e["id"]
        ious = [r["iou3d"] for r in rows]
        summary = {"entries": rows, "mean_iou3d": float(np.mean(ious)), "median_iou3d": float(np.median(ious))}
        _write_json(args.output, summary)
        log.info("3DIoU mean %.4f median %.4f over %d rooms", summary["mean_iou3d"], summary["median_iou3d"],
                 len(rows))
        return EXIT_OK
    report = evaluate_one(args.pred, args.gt, s)
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    report.save(args.output)
    log.info("3DIoU %.4f 2DIoU %.4f", report.iou3d, report.iou2d)
    return EXIT_OK


def cmd_reconstruct(args, s) -> int:
    layout = load_layout(args.input, threshold=float(s["threshold"]), pair_tolerance=float(s["pair_tolerance"]),
                         strict=False)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    lay.export_obj(layout, out)
    layout.save(out.with_suffix(".layout.json"))
    return EXIT_OK


def draw_floorplan(pred: lay.RoomLayout | None, gt: lay.RoomLayout | None, size: int = 512) -> Image.Image:
    """Top view: GT outline blue, prediction green, camera red (north = +z up)."""
    polys = [p.floor_polygon for p in (pred, gt) if p is not None]
    extent = max([float(np.abs(p).max()) for p in polys] + [1.0]) * 1.1
    scale = size / (2 * extent)

    def px(poly):
        return [(size / 2 + x * scale, size / 2 - z * scale) for x, z in poly]

    im = Image.new("RGB", (size, size), "white")
    d = ImageDraw.Draw(im)
    width = max(2, size // 170)
    for layout, color in ((gt, (0, 0, 255)), (pred, (0, 170, 0))):
        if layout is not None:
            pts = px(layout.floor_polygon)
            d.line(pts + pts[:1], fill=color, width=width)
    r = max(3, size // 100)
    d.ellipse([size / 2 - r, size / 2 - r, size / 2 + r, size / 2 + r], fill=(255, 0, 0))
    return im


def cmd_floorplan(args, s) -> int:
    kw = {"threshold": float(s["threshold"]), "pair_tolerance": float(s["pair_tolerance"])}
    gt = load_layout(args.gt, strict=True, **kw) if args.gt else None
    pred = load_layout(args.pred, strict=False, **kw) if args.pred else None
    if gt is None and pred is None:
        raise UsageError("floorplan needs --pred and/or --gt")
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    draw_floorplan(pred, gt, int(args.size)).save(out, format="PNG", compress_level=6)
    return EXIT_OK


def cmd_sweep(args, s) -> int:
    """Fit one target at every published (alpha, beta) pair and tabulate the outcome."""
    target = load_maps(args.target)
    reference = _reference_for(args, target)
    gt = load_layout(args.gt) if args.gt else None
    base = fit_config(s)
    rows = []
    for alpha, beta in fitmod.SWEEP_PAIRS:
        cfg = base.replace(alpha=alpha, beta=beta)
        trace = fitmod.fit_tps(reference, target, cfg)
        # a common yardstick: the default-weight loss of each result
        yard = fitmod.overall_loss(trace.warped, target, base.replace(alpha=0.75, beta=0.25))[0]
        row = {"alpha": alpha, "beta": beta, "initial_loss": trace.initial_loss, "final_loss": trace.final_loss,
               "loss_ratio": trace.final_loss / trace.initial_loss if trace.initial_loss else 0.0,
               "reference_weight_loss": yard, "iou3d": None}
        if gt is not None:
            try:
                rec = lay.maps_to_layout(trace.warped, strict=False)
                row["iou3d"] = metrics.iou_3d(rec, gt)
            except lay.LayoutError:
                row["iou3d"] = 0.0
        rows.append(row)
    for rank, i in enumerate(sorted(range(len(rows)), key=lambda i: rows[i]["loss_ratio"]), start=1):
        rows[i]["convergence_rank"] = rank
    out = Path(args.output)
    _write_json(out, {"target": str(args.target), "config": base.to_dict(), "runs": rows})
    with open(out.with_suffix(".csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    for r in rows:
        log.info("alpha=%.2f beta=%.2f loss ratio %.3f rank %d", r["alpha"], r["beta"], r["loss_ratio"],
                 r["convergence_rank"])
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or YAML file whose keys mirror the flags")
    common.add_argument("--resolution", help="WxH, default 1024x512")
    common.add_argument("--mode", choices=("cuboid", "noncuboid"))
    common.add_argument("--seed", type=int)
    common.add_argument("--threshold", type=float, help="blob / boundary binarization level")
    common.add_argument("--pair-tolerance", type=float, help="ceiling-floor column tolerance in px")
    common.add_argument("--manhattan", action="store_const", const=True,
                        help="snap recovered predictions to axis-parallel walls")
    common.add_argument("--workers", type=int, help="parallel workers for corpus directories")
    common.add_argument("-v", "--verbose", action="store_true")

    fitopts = argparse.ArgumentParser(add_help=False)
    fitopts.add_argument("--grid-side", type=int, help="control lattice side (default 4, noncuboid 8)")
    fitopts.add_argument("--alpha", type=float)
    fitopts.add_argument("--beta", type=float)
    fitopts.add_argument("--delta", type=float)
    fitopts.add_argument("--steps", type=int)

    splitopts = argparse.ArgumentParser(add_help=False)
    splitopts.add_argument("--unit-width", type=int)
    splitopts.add_argument("--separator", type=int)

    p = argparse.ArgumentParser(prog="tpslayout", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("gen-reference", parents=[common], help="render the canonical reference maps")
    c.add_argument("--output", required=True, help="output maps prefix")
    c.set_defaults(func=cmd_gen_reference)

    c = sub.add_parser("synth", parents=[common], help="write a synthetic room corpus")
    c.add_argument("--output", required=True, help="corpus directory")
    c.add_argument("--count", type=int)
    c.add_argument("--min-corners", type=int)
    c.add_argument("--max-corners", type=int)
    c.set_defaults(func=cmd_synth)

    c = sub.add_parser("warp", parents=[common], help="warp maps through a control grid")
    c.add_argument("--input", required=True, help="maps prefix")
    c.add_argument("--grid", required=True, help="control grid JSON")
    c.add_argument("--smoothing", type=float, default=0.0)
    c.add_argument("--output", required=True)
    c.set_defaults(func=cmd_warp)

    c = sub.add_parser("fit", parents=[common, fitopts], help="fit control points to target maps")
    c.add_argument("--target", required=True, help="target maps prefix or corpus directory")
    c.add_argument("--input", help="reference maps prefix (default: canonical reference)")
    c.add_argument("--output", required=True, help="output prefix, or directory for a corpus")
    c.set_defaults(func=cmd_fit)

    c = sub.add_parser("postprocess", parents=[common, splitopts], help="split merged corners")
    c.add_argument("--input", required=True, help="maps prefix or directory of maps")
    c.add_argument("--output", required=True)
    c.set_defaults(func=cmd_postprocess)

    c = sub.add_parser("evaluate", parents=[common], help="score predicted maps against ground truth")
    c.add_argument("--pred", required=True, help="predicted maps prefix or directory")
    c.add_argument("--gt", required=True, help="GT maps prefix, layout JSON or corpus directory")
    c.add_argument("--output", required=True, help="report JSON")
    c.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("reconstruct", parents=[common], help="export a room mesh as OBJ")
    c.add_argument("--input", required=True, help="maps prefix or layout JSON")
    c.add_argument("--output", required=True, help="OBJ path")
    c.set_defaults(func=cmd_reconstruct)

    c = sub.add_parser("floorplan", parents=[common], help="draw a top-view floor plan PNG")
    c.add_argument("--pred", help="predicted maps prefix or layout JSON")
    c.add_argument("--gt", help="GT maps prefix or layout JSON")
    c.add_argument("--size", type=int, default=512)
    c.add_argument("--output", required=True)
    c.set_defaults(func=cmd_floorplan)

    c = sub.add_parser("sweep", parents=[common, fitopts], help="fit at each loss-weight pair of the sweep")
    c.add_argument("--target", required=True, help="target maps prefix")
    c.add_argument("--input", help="reference maps prefix")
    c.add_argument("--gt", help="GT layout for IoU columns")
    c.add_argument("--output", required=True, help="report JSON (a CSV is written alongside)")
    c.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s")
    try:
        return args.func(args, _settings(args))
    except UsageError as exc:
        print(f"tpslayout: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (fitmod.DivergenceError, SingularSystemError, FloatingPointError) as exc:
        print(f"tpslayout: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError, KeyError, json.JSONDecodeError, synth.CorpusError) as exc:
        print(f"tpslayout: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
