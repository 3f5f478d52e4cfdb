"""Command-line entry point: ``tdm run|bench|metrics|analyze|dataset|fixture``.

Machine-readable output goes to stdout, logs to stderr. Exit codes:
0 success, 1 validation failure (bad input, split leak), 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .annotations import Manifest, load_manifest
from .conditions import ConditionThresholds, categorize, error_breakdown
from .errors import PipelineError, RasterFormatError, TdmError, ValidationError
from .frames import Frame
from .metrics import map_suite, match_detections, prf1, sum_outcomes
from .pipeline import (
    PipelineConfig,
    frame_source_directory,
    frame_source_synthetic,
    make_stubs,
    run_pipeline,
    run_sequential,
    run_threaded,
)
from .pnm import read_pnm, write_pnm
from .predictions import load_predictions

log = logging.getLogger("tdmvision")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
MIN_RELIABLE_STAGE_MS = 1.0


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# --- output helpers --------------------------------------------------------

def _emit(args, doc: object, rows: Sequence[dict] | None = None,
          columns: Sequence[str] | None = None) -> None:
    if args.format == "json" or rows is None:
        sys.stdout.write(json.dumps(doc, indent=1) + "\n")
        return
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns or rows[0].keys()),
                            lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: "" if v is None else v for k, v in row.items()})
    sys.stdout.write(buf.getvalue())


def _write_report(path: str, report) -> None:
    text = report.to_csv() if path.endswith(".csv") else report.to_json() + "\n"
    Path(path).write_text(text)


# --- run / bench -----------------------------------------------------------

def _config(args, mode: str) -> PipelineConfig:
    return PipelineConfig(
        mode=mode,
        queue_capacity=args.queue_capacity,
        warmup_frames=args.warmup,
        det_latency_ms=args.det_latency_ms,
        seg_latency_ms=args.seg_latency_ms,
        jitter_ms=args.jitter_ms,
        seed=args.seed,
        watchdog_s=args.watchdog_s,
    )


def _source(args):
    if args.source == "synthetic":
        count = args.frames if args.frames is not None else 100
        return frame_source_synthetic(args.seed, count, args.width, args.height)
    frames = frame_source_directory(args.source)
    if args.frames is None:
        return frames
    return (f for f, _ in zip(frames, range(args.frames)))


def _run_once(args, mode: str, overlays: bool = False):
    cfg = _config(args, mode)
    det, seg = make_stubs(cfg)
    return run_pipeline(cfg, _source(args), det, seg, overlays=overlays)


def cmd_run(args) -> int:
    overlay_dir = Path(args.emit_overlays) if args.emit_overlays else None
    outputs, report = _run_once(args, args.mode, overlays=overlay_dir is not None)
    if overlay_dir is not None:
        overlay_dir.mkdir(parents=True, exist_ok=True)
        for af in outputs:
            write_pnm(overlay_dir / f"frame_{af.frame_id:06d}.ppm", af.overlay)
    if args.report:
        _write_report(args.report, report)
    log.info("mode=%s frames=%d fps=%.2f e2e_p95=%.1f ms", report.mode,
             report.frames_processed, report.fps, report.e2e_ms_p95)
    summaries = [af.summary() for af in outputs]
    rows = [{"frame_id": s["frame_id"], "detections": len(s["detections"]),
             "masks": len(s["masks"]), "mask_pixels": sum(m["pixels"] for m in s["masks"])}
            for s in summaries]
    _emit(args, {"mode": report.mode, "frames": summaries}, rows,
          ["frame_id", "detections", "masks", "mask_pixels"])
    return EXIT_OK


def cmd_bench(args) -> int:
    threaded = args.mode.replace("-", "_")
    if threaded == "sequential":
        threaded = "pipelined"
    # the baseline runs the threaded mode's segmentation strategy on one thread
    cfg = _config(args, threaded)
    seq_out, seq = run_sequential(cfg, _source(args), *make_stubs(cfg))
    thr_out, thr = run_threaded(cfg, _source(args), *make_stubs(cfg))

    speedup = thr.fps / seq.fps if seq.fps > 0 else 0.0
    reliable = min(args.det_latency_ms, args.seg_latency_ms) >= MIN_RELIABLE_STAGE_MS
    note = "" if reliable else "unreliable: sub-ms stages"
    if not reliable:
        log.warning("stage latencies below %.0f ms; speedup is dominated by overhead",
                    MIN_RELIABLE_STAGE_MS)
    rows = []
    for rep, sp in ((seq, 1.0), (thr, speedup)):
        rows.append({
            "mode": rep.mode, "frames": rep.frames_processed, "fps": rep.fps,
            "det_ms_mean": rep.det_ms_mean, "seg_ms_mean": rep.seg_ms_mean,
            "e2e_ms_mean": rep.e2e_ms_mean, "e2e_ms_p95": rep.e2e_ms_p95,
            "max_queue_depth": rep.max_queue_depth, "speedup": sp, "note": note,
        })
    identical = seq_out == thr_out
    if args.report:
        Path(args.report).write_text(json.dumps({"rows": rows}, indent=1) + "\n")
    log.info("sequential %.2f fps, %s %.2f fps, speedup %.3f", seq.fps, thr.mode, thr.fps,
             speedup)
    _emit(args, {"rows": rows, "speedup": speedup, "reliable": reliable,
                 "outputs_identical": identical}, rows)
    return EXIT_OK


# --- metrics / analyze -----------------------------------------------------

def _check_ids(manifest: Manifest, preds: dict[str, dict]) -> list[str]:
    known = {r.image_id for r in manifest.records}
    return sorted({i for by_image in preds.values() for i in by_image if i not in known})


def evaluate_model(manifest: Manifest, by_image: dict, sweep: bool = False) -> dict:
    gts = {r.image_id: list(r.gt_boxes) for r in manifest.records}
    dets = {k: list(by_image.get(k, [])) for k in gts}
    row = map_suite(dets, gts, sweep=sweep)
    total = sum_outcomes([match_detections(dets[k], gts[k], 0.5) for k in gts])
    row["precision"], row["recall"], row["f1"] = prf1(total)
    return row


METRIC_COLUMNS = ["model", "mAP50", "mAP75", "mAP95", "precision", "recall", "f1"]


def cmd_metrics(args) -> int:
    manifest = load_manifest(args.manifest)
    preds = load_predictions(args.predictions)
    unknown = _check_ids(manifest, preds)
    if unknown:
        raise ValidationError(f"predictions reference unknown image ids: {', '.join(unknown)}")
    rows = [{"model": tag, **evaluate_model(manifest, by_image, args.sweep)}
            for tag, by_image in preds.items()]
    columns = METRIC_COLUMNS + (["mAP50_95"] if args.sweep else [])
    _emit(args, {"rows": rows}, rows, columns)
    return EXIT_OK


def _thresholds(args) -> ConditionThresholds:
    return ConditionThresholds(
        blur_laplacian_var=args.blur_threshold,
        dark_mean=args.dark,
        bright_mean=args.bright,
        small_object_area_frac=args.small_object,
        occlusion_iou=args.occlusion_iou,
        small_object_rule=args.small_object_rule,
    )


ANALYZE_COLUMNS = ["condition", "images", "tp", "fp", "fn", "precision", "recall", "map50"]


def cmd_analyze(args) -> int:
    thresholds = _thresholds(args)
    manifest = load_manifest(args.manifest)
    preds = load_predictions(args.predictions)
    unknown = _check_ids(manifest, preds)
    if unknown:
        raise ValidationError(f"predictions reference unknown image ids: {', '.join(unknown)}")
    if len(preds) > 1:
        log.warning("analyzing the first model tag only: %s", next(iter(preds)))
    by_image = next(iter(preds.values()))
    images_dir = Path(args.images) if args.images else Path(args.manifest).parent

    per_image = []
    for idx, rec in enumerate(manifest.records):
        frame = Frame(idx, 0.0, read_pnm(images_dir / rec.file), rec.image_id)
        tags = categorize(frame, rec, thresholds)
        dets = list(by_image.get(rec.image_id, []))
        gts = list(rec.gt_boxes)
        per_image.append((tags, match_detections(dets, gts, 0.5), dets, gts))
    rows = [r.as_dict() for r in error_breakdown(per_image)]
    _emit(args, {"rows": rows}, rows, ANALYZE_COLUMNS)
    return EXIT_OK


# --- dataset / fixture -----------------------------------------------------

def cmd_dataset(args) -> int:
    from .dataset import instance_histogram, resolution_histogram, spatial_heatmap, split_check

    if args.dataset_cmd == "stats":
        m = load_manifest(args.manifest)
        if args.kind == "instances":
            hist = {str(k): v for k, v in instance_histogram(m).items()}
        else:
            hist = {f"{w}x{h}": v for (w, h), v in resolution_histogram(m).items()}
        rows = [{"value": k, "count": v} for k, v in hist.items()]
        _emit(args, {"kind": args.kind, "histogram": hist}, rows, ["value", "count"])
        return EXIT_OK

    if args.dataset_cmd == "heatmap":
        hm = spatial_heatmap(load_manifest(args.manifest), args.grid)
        rows = [{"row": r, "col": c, "count": int(hm.counts[r, c])}
                for r in range(hm.grid_size) for c in range(hm.grid_size)]
        _emit(args, {"grid_size": hm.grid_size, "total": hm.total,
                     "counts": hm.counts.tolist()}, rows, ["row", "col", "count"])
        return EXIT_OK

    paths = {}
    for split in ("train", "val", "test"):
        explicit = getattr(args, split)
        if explicit:
            paths[split] = Path(explicit)
        elif args.dir:
            paths[split] = Path(args.dir) / f"{split}.json"
        else:
            raise UsageError(f"split-check needs --{split} or --dir")
    manifests = {s: load_manifest(p) for s, p in paths.items()}
    for s, m in manifests.items():
        if m.split != s:
            log.warning("%s declares split %r but was given as --%s", paths[s], m.split, s)
    report = split_check(manifests["train"], manifests["val"], manifests["test"])
    doc = report.as_dict()
    rows = [{"split": s, "count": report.counts[s], "fraction": report.fractions[s],
             "deviation": report.deviations[s]} for s in ("train", "val", "test")]
    if args.format == "csv":
        _emit(args, doc, rows, ["split", "count", "fraction", "deviation"])
    else:
        _emit(args, doc)
    for s in report.flagged:
        log.warning("%s fraction %.3f is off target by %+.3f", s, report.fractions[s], report.deviations[s])
    if report.leaks:
        log.error("split leakage: %s", ", ".join(report.leaks))
        return EXIT_INVALID
    return EXIT_OK


def cmd_fixture(args) -> int:
    from .dataset import synthetic_fixture

    manifests = synthetic_fixture(args.seed, args.n, args.width, args.height, args.out,
                                  args.condition_fraction)
    counts = {m.split: len(m.records) for m in manifests}
    rows = [{"split": s, "count": c} for s, c in counts.items()]
    _emit(args, {"out": str(args.out), "counts": counts}, rows, ["split", "count"])
    return EXIT_OK


# --- parser ----------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--format", choices=("json", "csv"), default=argparse.SUPPRESS)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--log-level", default=argparse.SUPPRESS)
    return p


def _pipeline_flags(p: argparse.ArgumentParser, default_frames: int | None) -> None:
    p.add_argument("--mode", default="pipelined",
                   choices=("sequential", "pipelined", "parallel-independent",
                            "parallel_independent"))
    p.add_argument("--queue-capacity", type=int, default=4)
    p.add_argument("--det-latency-ms", type=float, default=0.0)
    p.add_argument("--seg-latency-ms", type=float, default=0.0)
    p.add_argument("--jitter-ms", type=float, default=0.0)
    p.add_argument("--warmup", type=int, default=10)
    p.add_argument("--frames", type=int, default=default_frames,
                   help="frame count for synthetic sources, limit for directories")
    p.add_argument("--source", default="synthetic", help="DIR of PGM/PPM files or 'synthetic'")
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=48)
    p.add_argument("--watchdog-s", type=float, default=30.0)
    p.add_argument("--report", help="write the RunReport to this .json or .csv path")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="tdm", parents=[common],
                     description="Two-stage detection/segmentation pipeline toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", parents=[common], help="run the pipeline over a frame source")
    _pipeline_flags(p, None)
    p.add_argument("--emit-overlays", metavar="DIR")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", parents=[common], help="compare sequential and threaded runs")
    _pipeline_flags(p, None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("metrics", parents=[common], help="detection metrics for predictions")
    p.add_argument("--predictions", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--sweep", action="store_true", help="add the mAP50_95 column")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("analyze", parents=[common], help="per-condition error breakdown")
    p.add_argument("--manifest", required=True)
    p.add_argument("--images", help="image root (default: the manifest's directory)")
    p.add_argument("--predictions", required=True)
    defaults = ConditionThresholds()
    p.add_argument("--blur-threshold", type=float, default=defaults.blur_laplacian_var)
    p.add_argument("--dark", type=float, default=defaults.dark_mean)
    p.add_argument("--bright", type=float, default=defaults.bright_mean)
    p.add_argument("--small-object", type=float, default=defaults.small_object_area_frac)
    p.add_argument("--occlusion-iou", type=float, default=defaults.occlusion_iou)
    p.add_argument("--small-object-rule", choices=("any", "all"),
                   default=defaults.small_object_rule)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("dataset", parents=[common], help="dataset audits")
    dsub = p.add_subparsers(dest="dataset_cmd", required=True, parser_class=_Parser)
    d = dsub.add_parser("stats", parents=[common])
    d.add_argument("--manifest", required=True)
    d.add_argument("--kind", choices=("instances", "resolution"), default="instances")
    d = dsub.add_parser("heatmap", parents=[common])
    d.add_argument("--manifest", required=True)
    d.add_argument("--grid", type=int, default=32)
    d = dsub.add_parser("split-check", parents=[common])
    d.add_argument("--dir", help="directory holding train.json, val.json, test.json")
    d.add_argument("--train")
    d.add_argument("--val")
    d.add_argument("--test")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("fixture", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=48)
    p.add_argument("--out", required=True)
    p.add_argument("--condition-fraction", type=float, default=0.1)
    p.set_defaults(func=cmd_fixture)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_INVALID
    for name, default in (("format", "json"), ("seed", 0), ("log_level", "INFO")):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=str(args.log_level).upper(), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_INVALID
    except (PipelineError, RasterFormatError) as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME
    except ValidationError as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except (TdmError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
