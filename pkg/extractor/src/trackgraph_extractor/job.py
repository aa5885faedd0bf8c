"""Batch extraction: frames directory plus detections CSV in, feature
sidecar (JSON lines) out, bit-compatible with the tracker's parser."""

from __future__ import annotations

import json
import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import cv2
import numpy as np

from .features import extract_histogram, extract_keypoints, load_deep_embedder

logger = logging.getLogger(__name__)

FAMILIES = ("histogram", "descriptors", "deep")
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}

_DIGITS = re.compile(r"(\d+)")


class InputError(Exception):
    """Malformed or inconsistent job input; message carries the location."""


@dataclass(frozen=True)
class DetectionBox:
    frame: int
    det: int
    x: float
    y: float
    w: float
    h: float


@dataclass(frozen=True)
class ExtractionJob:
    """One extraction run over a frames directory and its detections CSV."""

    frames_dir: Path
    detections_csv: Path
    output_path: Path
    families: tuple[str, ...] = ("histogram", "descriptors")
    bins_per_channel: int = 8
    jobs: int = 1

    def __post_init__(self):
        unknown = set(self.families) - set(FAMILIES)
        if unknown:
            raise ValueError(f"unknown feature families {sorted(unknown)}; pick from {FAMILIES}")
        if not self.families:
            raise ValueError("at least one feature family is required")
        if not 1 <= self.bins_per_channel <= 256:
            raise ValueError(f"bins_per_channel must lie in 1..256, got {self.bins_per_channel}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {self.jobs}")


def read_detections(path: Path) -> dict[int, list[DetectionBox]]:
    """Headerless CSV frame,id,x,y,w,h,conf; the id column is ignored and a
    detection's index is its row position within its frame."""
    out: dict[int, list[DetectionBox]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line:
                raise InputError(f"{path}:{lineno}: blank line")
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 7:
                raise InputError(f"{path}:{lineno}: expected 7 comma-separated fields, got {len(parts)}")
            try:
                frame = int(parts[0])
                int(parts[1])
                x, y, w, h = (float(parts[i]) for i in range(2, 6))
                float(parts[6])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
            if frame < 1:
                raise InputError(f"{path}:{lineno}: frame must be >= 1, got {frame}")
            if not all(math.isfinite(v) for v in (x, y, w, h)) or w <= 0 or h <= 0:
                raise InputError(f"{path}:{lineno}: box must be finite with positive size")
            dets = out.setdefault(frame, [])
            dets.append(DetectionBox(frame, len(dets), x, y, w, h))
    return out


def index_frames(frames_dir: Path) -> dict[int, Path]:
    """Map frame numbers to image files by the digits in each file name."""
    if not frames_dir.is_dir():
        raise InputError(f"{frames_dir}: not a directory")
    out: dict[int, Path] = {}
    for path in sorted(frames_dir.iterdir()):
        if path.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        groups = _DIGITS.findall(path.stem)
        if not groups:
            logger.warning("%s: no frame number in file name, skipping", path)
            continue
        frame = int(groups[-1])
        if frame in out:
            raise InputError(f"{path}: duplicate frame number {frame} (also {out[frame].name})")
        out[frame] = path
    if not out:
        raise InputError(f"{frames_dir}: no numbered image files found")
    return out


def crop_detection(image: np.ndarray, box: DetectionBox, where: str) -> Optional[np.ndarray]:
    """Integer-pixel crop of the box, clipped to the image with a warning;
    None when nothing remains inside the frame."""
    height, width = image.shape[:2]
    x0 = math.floor(box.x)
    y0 = math.floor(box.y)
    x1 = math.ceil(box.x + box.w)
    y1 = math.ceil(box.y + box.h)
    if x0 < 0 or y0 < 0 or x1 > width or y1 > height:
        logger.warning(
            "%s: detection %d box (%g, %g, %g, %g) exceeds the %dx%d frame, clipping",
            where, box.det, box.x, box.y, box.w, box.h, width, height,
        )
    x0, y0 = max(x0, 0), max(y0, 0)
    x1, y1 = min(x1, width), min(y1, height)
    if x1 <= x0 or y1 <= y0:
        logger.warning("%s: detection %d lies fully outside the frame", where, box.det)
        return None
    return image[y0:y1, x0:x1]


_WORKER_EMBEDDER = None
_WORKER_EMBEDDER_READY = False


def _embedder():
    global _WORKER_EMBEDDER, _WORKER_EMBEDDER_READY
    if not _WORKER_EMBEDDER_READY:
        _WORKER_EMBEDDER = load_deep_embedder()
        _WORKER_EMBEDDER_READY = True
    return _WORKER_EMBEDDER


def _extract_frame(task) -> list[dict]:
    frame, image_path, boxes, families, bins = task
    image = cv2.imread(str(image_path), cv2.IMREAD_COLOR)
    if image is None:
        raise InputError(f"{image_path}: cannot read image")
    entries = []
    for box in boxes:
        entry: dict = {"frame": frame, "det": box.det}
        crop = crop_detection(image, box, str(image_path))
        if crop is not None:
            if "histogram" in families:
                entry["histogram"] = extract_histogram(crop, bins).tolist()
            if "descriptors" in families:
                entry["descriptors"] = extract_keypoints(crop).tolist()
            if "deep" in families:
                embedder = _embedder()
                if embedder is not None:
                    entry["deep"] = embedder.embed(crop).tolist()
        entries.append(entry)
    return entries


@dataclass
class JobResult:
    output_path: Path
    families: tuple[str, ...]
    frames: int
    detections: int
    deep_dim: Optional[int] = None
    meta: dict = field(default_factory=dict)


def run_job(job: ExtractionJob) -> JobResult:
    """Extract every detection's features and write the sorted sidecar."""
    detections = read_detections(job.detections_csv)
    frame_files = index_frames(job.frames_dir)
    missing = sorted(set(detections) - set(frame_files))
    if missing:
        raise InputError(
            f"{job.frames_dir}: no image for frame{'s' if len(missing) > 1 else ''} "
            f"{', '.join(map(str, missing))}"
        )

    families = tuple(f for f in FAMILIES if f in job.families)
    deep_dim = None
    if "deep" in families:
        embedder = _embedder()
        if embedder is None:
            families = tuple(f for f in families if f != "deep")
            if not families:
                raise InputError("deep features unavailable and no other family requested")
        else:
            deep_dim = embedder.dim

    tasks = [
        (frame, frame_files[frame], detections[frame], families, job.bins_per_channel)
        for frame in sorted(detections)
    ]
    if job.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=job.jobs) as pool:
            per_frame = list(pool.map(_extract_frame, tasks))
    else:
        per_frame = [_extract_frame(task) for task in tasks]

    entries = [entry for frame_entries in per_frame for entry in frame_entries]
    entries.sort(key=lambda e: (e["frame"], e["det"]))

    meta = {
        "tool": "trackgraph-extract",
        "families": list(families),
        "hist_bins": job.bins_per_channel,
    }
    if deep_dim is not None:
        meta["deep_dim"] = deep_dim

    job.output_path.parent.mkdir(parents=True, exist_ok=True)
    with open(job.output_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(json.dumps({"meta": meta}) + "\n")
        for entry in entries:
            fh.write(json.dumps(entry) + "\n")
    return JobResult(job.output_path, families, len(tasks), len(entries), deep_dim, meta)
