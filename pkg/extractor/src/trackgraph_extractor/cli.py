"""Command line entry point for batch feature extraction."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .job import FAMILIES, ExtractionJob, InputError, run_job

logger = logging.getLogger(__name__)


def _setup_logging():
    name = os.environ.get("TRACKGRAPH_LOG", "WARNING").upper()
    level = getattr(logging, name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _parse_families(raw: str) -> tuple[str, ...]:
    families = tuple(part.strip() for part in raw.split(",") if part.strip())
    unknown = set(families) - set(FAMILIES)
    if unknown:
        raise argparse.ArgumentTypeError(
            f"unknown families {sorted(unknown)}; pick from {','.join(FAMILIES)}"
        )
    if not families:
        raise argparse.ArgumentTypeError("need at least one family")
    return families


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trackgraph-extract",
        description="Crop each detection out of its frame image and write a "
        "feature sidecar (JSON lines) with color histograms, keypoint "
        "descriptors and optionally deep embeddings.",
    )
    parser.add_argument("frames_dir", help="directory of frame images with numbered names")
    parser.add_argument("detections", help="detections CSV (frame,id,x,y,w,h,conf)")
    parser.add_argument("output", help="sidecar output path (.features.jsonl)")
    parser.add_argument(
        "--families",
        type=_parse_families,
        default=("histogram", "descriptors"),
        help="comma-separated subset of histogram,descriptors,deep "
        "(default: histogram,descriptors)",
    )
    parser.add_argument("--bins", type=int, default=8, help="histogram bins per channel (default 8)")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers over frames")
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        job = ExtractionJob(
            frames_dir=Path(args.frames_dir),
            detections_csv=Path(args.detections),
            output_path=Path(args.output),
            families=args.families,
            bins_per_channel=args.bins,
            jobs=args.jobs,
        )
        result = run_job(job)
    except FileNotFoundError as exc:
        print(f"error: {exc.filename}: no such file", file=sys.stderr)
        return 1
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    deep = f", deep dim {result.deep_dim}" if result.deep_dim else ""
    print(
        f"{result.output_path}: {result.detections} detections over {result.frames} frames, "
        f"families {','.join(result.families)}{deep}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
