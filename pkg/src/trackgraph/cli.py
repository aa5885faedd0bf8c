"""Command line entry points: track, eval, synth and pipeline subcommands."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional

from .core import AppearanceMode, Detection, FeatureBundle, TrackerConfig
from .engine import TrackerEngine, fit_deep_basis
from .io_formats import (
    FormatError,
    SequenceBundle,
    assemble_sequence,
    parse_config,
    parse_detections,
    parse_features,
    parse_gt,
    parse_tracks,
    write_detections,
    write_features,
    write_gt,
    write_report,
    write_tracks,
)
from .metrics import evaluate_tracks, rows_from_tracks
from .synth import generate_sequence

logger = logging.getLogger(__name__)


def _setup_logging():
    name = os.environ.get("TRACKGRAPH_LOG", "WARNING").upper()
    level = getattr(logging, name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _add_tracker_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("tracker")
    g.add_argument("--config", help="flat key = value config file")
    g.add_argument("--alpha", type=float, help="motion term weight")
    g.add_argument("--beta", type=float, help="appearance term weight")
    g.add_argument("--iou-threshold", type=float, help="edge prune threshold (edges need IOU above it)")
    g.add_argument("--appearance", choices=["sift", "deep", "none"], help="appearance scoring mode")
    g.add_argument("--fps", type=float, help="frames per second of the sequence")
    g.add_argument("--max-lost", type=int, help="frames a track may coast before it is dropped")
    g.add_argument("--border-margin", type=float, help="border margin as a fraction of each frame dimension")
    g.add_argument("--frame-width", type=float, help="frame width in pixels")
    g.add_argument("--frame-height", type=float, help="frame height in pixels")
    g.add_argument("--min-match-weight", type=float, help="smallest edge weight a match may use")
    g.add_argument("--literal-eq10", action="store_true", help="use the published fps-scaled position update")
    g.add_argument("--greedy", action="store_true", help="greedy matching instead of the exact solver")


def _build_config(args) -> TrackerConfig:
    cfg = TrackerConfig()
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = parse_config(fh, cfg, args.config)
    overrides = {}
    for attr, key in [
        ("alpha", "alpha"),
        ("beta", "beta"),
        ("iou_threshold", "iou_prune_threshold"),
        ("fps", "fps"),
        ("max_lost", "max_lost_frames"),
        ("border_margin", "border_margin_frac"),
        ("frame_width", "frame_width"),
        ("frame_height", "frame_height"),
        ("min_match_weight", "min_match_weight"),
    ]:
        value = getattr(args, attr)
        if value is not None:
            overrides[key] = value
    if args.appearance is not None:
        overrides["appearance_mode"] = AppearanceMode(args.appearance)
    if args.literal_eq10:
        overrides["literal_eq10"] = True
    if args.greedy:
        overrides["greedy_matching"] = True
    return replace(cfg, **overrides)


def _filter_min_conf(bundle: SequenceBundle, min_conf: float) -> SequenceBundle:
    """Drop low-confidence detections, reindexing and keeping features aligned."""
    detections: dict[int, list[Detection]] = {}
    features: dict[tuple[int, int], FeatureBundle] = {}
    for frame, dets in bundle.detections.items():
        feats = bundle.frame_features(frame)
        kept: list[Detection] = []
        for det, feat in zip(dets, feats):
            if det.confidence >= min_conf:
                new = Detection(frame, len(kept), det.bbox, det.confidence)
                kept.append(new)
                features[(frame, new.det_index)] = feat
        if kept:
            detections[frame] = kept
    return assemble_sequence(
        bundle.name,
        detections,
        features,
        bundle.gt,
        frame_width=bundle.frame_width,
        frame_height=bundle.frame_height,
        frame_count=bundle.frame_count,
    )


def _run_tracker(bundle: SequenceBundle, cfg: TrackerConfig):
    basis = None
    if cfg.appearance_mode is AppearanceMode.DEEP:
        basis = fit_deep_basis(bundle.features, cfg)
    engine = TrackerEngine(cfg, basis)
    counts: Counter = Counter()
    for frame in range(1, bundle.frame_count + 1):
        for event in engine.step(bundle.frame_detections(frame), bundle.frame_features(frame)):
            counts[event.kind.value] += 1
    return engine.finished_and_active(), counts


def _summary_line(name: str, frame_count: int, tracks, counts: Counter) -> str:
    kinds = " ".join(f"{k}={counts.get(k, 0)}" for k in ("born", "extended", "recovered", "lost", "left"))
    return f"{name}: frames={frame_count} tracks={len(tracks)} {kinds}"


def _track_color(track_id: int) -> str:
    return f"hsl({(track_id * 47) % 360}, 90%, 42%)"


def _write_overlays(tracks, frame_count: int, width: float, height: float, out_dir: Path):
    by_frame: dict[int, list] = {}
    for t in tracks:
        for obs in t.observations:
            by_frame.setdefault(obs.frame_index, []).append((t.id, obs))
    out_dir.mkdir(parents=True, exist_ok=True)
    digits = max(4, len(str(frame_count)))
    for frame in range(1, frame_count + 1):
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" height="{height:g}" '
            f'viewBox="0 0 {width:g} {height:g}">',
            f'<rect width="{width:g}" height="{height:g}" fill="#111"/>',
        ]
        for tid, obs in sorted(by_frame.get(frame, []), key=lambda p: p[0]):
            b = obs.bbox
            dash = ' stroke-dasharray="6 4"' if obs.source.value == "H" else ""
            color = _track_color(tid)
            parts.append(
                f'<rect x="{b.x:.2f}" y="{b.y:.2f}" width="{b.w:.2f}" height="{b.h:.2f}" '
                f'fill="none" stroke="{color}" stroke-width="2"{dash}/>'
            )
            parts.append(
                f'<text x="{b.x + 2:.2f}" y="{max(b.y - 4, 10):.2f}" fill="{color}" '
                f'font-size="12" font-family="monospace">{tid}</text>'
            )
        parts.append("</svg>")
        path = out_dir / f"frame_{frame:0{digits}d}.svg"
        path.write_text("\n".join(parts) + "\n", encoding="utf-8")


def _load_bundle(det_path: str, features_path: Optional[str], cfg: TrackerConfig, min_conf: float) -> SequenceBundle:
    with open(det_path, "r", encoding="utf-8") as fh:
        detections = parse_detections(fh, det_path)
    features = None
    if features_path is not None:
        with open(features_path, "r", encoding="utf-8") as fh:
            features = parse_features(fh, features_path)
    bundle = assemble_sequence(
        Path(det_path).stem,
        detections,
        features,
        None,
        frame_width=cfg.frame_width,
        frame_height=cfg.frame_height,
    )
    if min_conf > 0:
        bundle = _filter_min_conf(bundle, min_conf)
    return bundle


def _sidecar_for(det_path: str) -> Optional[str]:
    candidate = Path(det_path).with_suffix(".features.jsonl")
    return str(candidate) if candidate.exists() else None


def _track_one(det_path: str, features_path: Optional[str], out_path: Optional[str],
               overlay_dir: Optional[str], cfg: TrackerConfig, min_conf: float) -> str:
    if cfg.appearance_mode is not AppearanceMode.NONE and features_path is None:
        raise ValueError(
            f"appearance mode '{cfg.appearance_mode.value}' needs a features sidecar for "
            f"{det_path}; pass --features or use --appearance none"
        )
    bundle = _load_bundle(det_path, features_path, cfg, min_conf)
    tracks, counts = _run_tracker(bundle, cfg)
    if out_path is None:
        write_tracks(tracks, sys.stdout)
    else:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            write_tracks(tracks, fh)
    if overlay_dir is not None:
        _write_overlays(tracks, bundle.frame_count, cfg.frame_width, cfg.frame_height, Path(overlay_dir))
    return _summary_line(bundle.name, bundle.frame_count, tracks, counts)


def cmd_track(args) -> int:
    cfg = _build_config(args)
    if len(args.detections) > 1:
        if args.features:
            raise ValueError("--features only applies to a single input; use sidecar naming for batches")
        if not args.output_dir:
            raise ValueError("multiple inputs need --output-dir")
        out_dir = Path(args.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        jobs = []
        for det_path in args.detections:
            out_path = str(out_dir / (Path(det_path).stem + ".tracks.csv"))
            overlay = str(out_dir / (Path(det_path).stem + "_overlay")) if args.overlay_dir else None
            jobs.append((det_path, _sidecar_for(det_path), out_path, overlay, cfg, args.min_conf))
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                for line in pool.map(_track_one_star, jobs):
                    print(line)
        else:
            for job in jobs:
                print(_track_one(*job))
        return 0

    det_path = args.detections[0]
    features_path = args.features or _sidecar_for(det_path)
    out_path = args.output
    summary = _track_one(det_path, features_path, out_path, args.overlay_dir, cfg, args.min_conf)
    if out_path is not None:
        print(summary)
    return 0


def _track_one_star(job) -> str:
    return _track_one(*job)


def _print_report_table(name: str, report):
    print(f"{'sequence':<20} {'mota':>8} {'fp':>6} {'fn':>6} {'idsw':>6} {'gt':>8}")
    print(f"{name:<20} {report.mota:>8.4f} {report.fp:>6} {report.fn:>6} {report.idsw:>6} {report.gt_total:>8}")


def cmd_eval(args) -> int:
    with open(args.tracks, "r", encoding="utf-8") as fh:
        rows = parse_tracks(fh, args.tracks)
    with open(args.gt, "r", encoding="utf-8") as fh:
        gt = parse_gt(fh, args.gt)
    report = evaluate_tracks(
        gt, rows, include_hypothetical=not args.exclude_hypothetical, iou_threshold=args.match_iou
    )
    _print_report_table(Path(args.tracks).stem, report)
    if args.report_out:
        with open(args.report_out, "w", encoding="utf-8", newline="") as fh:
            write_report(report, fh)
    return 0


def _write_bundle_files(bundle: SequenceBundle, out_dir: Path, seed: int):
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "detections.csv", "w", encoding="utf-8", newline="") as fh:
        write_detections(bundle.detections, fh)
    flat = {
        (frame, i): feat
        for frame, feats in bundle.features.items()
        for i, feat in enumerate(feats)
    }
    with open(out_dir / "features.jsonl", "w", encoding="utf-8", newline="") as fh:
        write_features(flat, fh, meta={"generator": "synth", "seed": seed, "name": bundle.name})
    with open(out_dir / "gt.csv", "w", encoding="utf-8", newline="") as fh:
        write_gt(bundle.gt, fh)


def cmd_synth(args) -> int:
    with open(args.scenario, "r", encoding="utf-8") as fh:
        scenario = json.load(fh)
    bundle = generate_sequence(scenario, args.seed)
    out_dir = Path(args.out_dir)
    _write_bundle_files(bundle, out_dir, args.seed)
    n_det = sum(len(v) for v in bundle.detections.values())
    print(f"{bundle.name}: wrote {bundle.frame_count} frames, {n_det} detections, "
          f"{len(bundle.gt)} gt entries to {out_dir}")
    return 0


def cmd_pipeline(args) -> int:
    with open(args.scenario, "r", encoding="utf-8") as fh:
        scenario = json.load(fh)
    bundle = generate_sequence(scenario, args.seed)
    cfg = _build_config(args)
    cfg = replace(cfg, frame_width=bundle.frame_width, frame_height=bundle.frame_height)
    if args.min_conf > 0:
        bundle = _filter_min_conf(bundle, args.min_conf)
    tracks, counts = _run_tracker(bundle, cfg)
    print(_summary_line(bundle.name, bundle.frame_count, tracks, counts))
    if not bundle.gt:
        raise ValueError("scenario produced no ground truth; nothing to score")
    report = evaluate_tracks(
        bundle.gt,
        rows_from_tracks(tracks),
        include_hypothetical=not args.exclude_hypothetical,
        iou_threshold=args.match_iou,
    )
    _print_report_table(bundle.name, report)
    if args.out_dir:
        out_dir = Path(args.out_dir)
        _write_bundle_files(bundle, out_dir, args.seed)
        with open(out_dir / "tracks.csv", "w", encoding="utf-8", newline="") as fh:
            write_tracks(tracks, fh)
        with open(out_dir / "report.txt", "w", encoding="utf-8", newline="") as fh:
            write_report(report, fh)
    if args.report_out:
        with open(args.report_out, "w", encoding="utf-8", newline="") as fh:
            write_report(report, fh)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trackgraph",
        description="Graph-based multi-object tracking over detection files, with "
        "synthetic data generation and CLEAR-style evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_track = sub.add_parser("track", help="run the tracker over detection CSV files")
    p_track.add_argument("detections", nargs="+", help="detection CSV file(s)")
    p_track.add_argument("--features", help="feature sidecar (single input only)")
    p_track.add_argument("--output", help="tracks CSV output path (default: stdout)")
    p_track.add_argument("--output-dir", help="output directory for multiple inputs")
    p_track.add_argument("--overlay-dir", help="write one SVG overlay per frame into this directory")
    p_track.add_argument("--min-conf", type=float, default=0.0, help="drop detections below this confidence")
    p_track.add_argument("--jobs", type=int, default=1, help="parallel workers for multiple inputs")
    _add_tracker_flags(p_track)
    p_track.set_defaults(func=cmd_track)

    p_eval = sub.add_parser("eval", help="score a tracks CSV against ground truth")
    p_eval.add_argument("tracks", help="tracks CSV (with header)")
    p_eval.add_argument("gt", help="ground-truth CSV")
    p_eval.add_argument("--exclude-hypothetical", action="store_true",
                        help="ignore rows the tracker only predicted")
    p_eval.add_argument("--match-iou", type=float, default=0.5, help="IOU needed for a gt/track match")
    p_eval.add_argument("--report-out", help="also write a machine-readable report here")
    p_eval.set_defaults(func=cmd_eval)

    p_synth = sub.add_parser("synth", help="expand a scenario JSON into detection/feature/gt files")
    p_synth.add_argument("scenario", help="scenario JSON path")
    p_synth.add_argument("out_dir", help="directory for the generated files")
    p_synth.add_argument("--seed", type=int, default=0, help="generator seed")
    p_synth.set_defaults(func=cmd_synth)

    p_pipe = sub.add_parser("pipeline", help="synth, track and eval in one go")
    p_pipe.add_argument("scenario", help="scenario JSON path")
    p_pipe.add_argument("--seed", type=int, default=0, help="generator seed")
    p_pipe.add_argument("--out-dir", help="also write all intermediate files here")
    p_pipe.add_argument("--report-out", help="write the machine-readable report here")
    p_pipe.add_argument("--min-conf", type=float, default=0.0, help="drop detections below this confidence")
    p_pipe.add_argument("--exclude-hypothetical", action="store_true",
                        help="ignore rows the tracker only predicted")
    p_pipe.add_argument("--match-iou", type=float, default=0.5, help="IOU needed for a gt/track match")
    _add_tracker_flags(p_pipe)
    p_pipe.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc.filename}: no such file", file=sys.stderr)
        return 1
    except (FormatError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
