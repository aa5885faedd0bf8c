"""Readers and writers for the on-disk interchange formats.

All float output goes through repr() so that write followed by parse gives
back bit-identical values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Optional, Sequence, TextIO

import numpy as np

from .core import (
    AppearanceMode,
    BoundingBox,
    Detection,
    FeatureBundle,
    ObservationSource,
    Track,
    TrackerConfig,
)
from .metrics import GtEntry, MetricsReport, TrackRow

TRACKS_HEADER = "frame,track_id,x,y,w,h,source"

_CONFIG_FLOAT_KEYS = {
    "alpha",
    "beta",
    "iou_prune_threshold",
    "fps",
    "border_margin_frac",
    "knn_ratio",
    "pca_fraction",
    "frame_width",
    "frame_height",
    "min_match_weight",
}
_CONFIG_INT_KEYS = {"max_lost_frames", "hist_bins_per_channel", "pca_fit_frames"}
_CONFIG_BOOL_KEYS = {"sift_match_normalization", "literal_eq10", "greedy_matching"}

_FEATURE_KEYS = {"frame", "det", "histogram", "descriptors", "deep"}


class FormatError(Exception):
    """Malformed input file; message carries the source location."""

    def __init__(self, where: str, lineno: int, problem: str):
        super().__init__(f"{where}:{lineno}: {problem}")
        self.where = where
        self.lineno = lineno
        self.problem = problem


def _split_fields(line: str, count: int, where: str, lineno: int) -> list[str]:
    parts = [p.strip() for p in line.split(",")]
    if len(parts) != count:
        raise FormatError(where, lineno, f"expected {count} comma-separated fields, got {len(parts)}")
    return parts


def _parse_int(token: str, what: str, where: str, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise FormatError(where, lineno, f"{what} must be an integer, got {token!r}") from None


def _parse_float(token: str, what: str, where: str, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise FormatError(where, lineno, f"{what} must be a number, got {token!r}") from None


def _iter_lines(lines: Iterable[str]):
    for lineno, raw in enumerate(lines, start=1):
        yield lineno, raw.rstrip("\r\n")


def parse_detections(lines: Iterable[str], where: str = "<detections>") -> dict[int, list[Detection]]:
    """Headerless CSV: frame,id,x,y,w,h,conf. The id column is ignored;
    det_index is the row's position within its frame."""
    out: dict[int, list[Detection]] = {}
    for lineno, line in _iter_lines(lines):
        if not line:
            raise FormatError(where, lineno, "blank line")
        f = _split_fields(line, 7, where, lineno)
        frame = _parse_int(f[0], "frame", where, lineno)
        _parse_int(f[1], "id", where, lineno)
        x = _parse_float(f[2], "x", where, lineno)
        y = _parse_float(f[3], "y", where, lineno)
        w = _parse_float(f[4], "w", where, lineno)
        h = _parse_float(f[5], "h", where, lineno)
        conf = _parse_float(f[6], "conf", where, lineno)
        try:
            det = Detection(frame, len(out.get(frame, ())), BoundingBox(x, y, w, h), conf)
        except ValueError as exc:
            raise FormatError(where, lineno, str(exc)) from None
        out.setdefault(frame, []).append(det)
    return out


def write_detections(detections: Mapping[int, Sequence[Detection]], stream: TextIO):
    for frame in sorted(detections):
        for det in detections[frame]:
            b = det.bbox
            stream.write(
                f"{frame},-1,{b.x!r},{b.y!r},{b.w!r},{b.h!r},{det.confidence!r}\n"
            )


def parse_gt(lines: Iterable[str], where: str = "<gt>") -> list[GtEntry]:
    """Headerless CSV: frame,gt_id,x,y,w,h."""
    out: list[GtEntry] = []
    seen: set[tuple[int, int]] = set()
    for lineno, line in _iter_lines(lines):
        if not line:
            raise FormatError(where, lineno, "blank line")
        f = _split_fields(line, 6, where, lineno)
        frame = _parse_int(f[0], "frame", where, lineno)
        gt_id = _parse_int(f[1], "gt_id", where, lineno)
        if (frame, gt_id) in seen:
            raise FormatError(where, lineno, f"duplicate gt entry for frame {frame}, gt_id {gt_id}")
        seen.add((frame, gt_id))
        coords = [_parse_float(f[i], "xywh"[i - 2], where, lineno) for i in range(2, 6)]
        try:
            out.append(GtEntry(frame, gt_id, BoundingBox(*coords)))
        except ValueError as exc:
            raise FormatError(where, lineno, str(exc)) from None
    return out


def write_gt(entries: Iterable[GtEntry], stream: TextIO):
    for e in sorted(entries, key=lambda g: (g.frame_index, g.gt_id)):
        b = e.bbox
        stream.write(f"{e.frame_index},{e.gt_id},{b.x!r},{b.y!r},{b.w!r},{b.h!r}\n")


def parse_features(
    lines: Iterable[str], where: str = "<features>"
) -> dict[tuple[int, int], FeatureBundle]:
    """JSON lines keyed by (frame, det); an optional leading {"meta": ...}
    object is accepted and skipped."""
    out: dict[tuple[int, int], FeatureBundle] = {}
    for lineno, line in _iter_lines(lines):
        if not line:
            raise FormatError(where, lineno, "blank line")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(where, lineno, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise FormatError(where, lineno, "each line must be a JSON object")
        if lineno == 1 and set(obj) == {"meta"}:
            continue
        unknown = set(obj) - _FEATURE_KEYS
        if unknown:
            raise FormatError(where, lineno, f"unknown keys {sorted(unknown)}")
        if "frame" not in obj or "det" not in obj:
            raise FormatError(where, lineno, "missing required keys 'frame' and 'det'")
        frame, det = obj["frame"], obj["det"]
        if not isinstance(frame, int) or not isinstance(det, int):
            raise FormatError(where, lineno, "'frame' and 'det' must be integers")
        if (frame, det) in out:
            raise FormatError(where, lineno, f"duplicate features for frame {frame}, det {det}")
        kwargs = {}
        try:
            if "histogram" in obj:
                kwargs["histogram"] = np.asarray(obj["histogram"], dtype=np.float64)
            if "descriptors" in obj:
                rows = obj["descriptors"]
                if rows:
                    kwargs["descriptors"] = np.asarray(rows, dtype=np.float64)
                else:
                    kwargs["descriptors"] = np.zeros((0, 0))
            if "deep" in obj:
                kwargs["deep_vector"] = np.asarray(obj["deep"], dtype=np.float64)
            out[(frame, det)] = FeatureBundle(**kwargs)
        except (ValueError, TypeError) as exc:
            raise FormatError(where, lineno, str(exc)) from None
    return out


def write_features(
    bundles: Mapping[tuple[int, int], FeatureBundle],
    stream: TextIO,
    meta: Optional[dict] = None,
):
    if meta is not None:
        stream.write(json.dumps({"meta": meta}) + "\n")
    for frame, det in sorted(bundles):
        b = bundles[(frame, det)]
        obj: dict = {"frame": frame, "det": det}
        if b.histogram is not None:
            obj["histogram"] = b.histogram.tolist()
        if b.descriptors is not None:
            obj["descriptors"] = b.descriptors.tolist()
        if b.deep_vector is not None:
            obj["deep"] = b.deep_vector.tolist()
        stream.write(json.dumps(obj) + "\n")


def write_tracks(tracks: Iterable[Track], stream: TextIO):
    """CSV with header; one row per observation, sorted by frame then track id."""
    rows = []
    for t in tracks:
        for obs in t.observations:
            rows.append((obs.frame_index, t.id, obs.bbox, obs.source.value))
    rows.sort(key=lambda r: (r[0], r[1]))
    stream.write(TRACKS_HEADER + "\n")
    for frame, tid, b, src in rows:
        stream.write(f"{frame},{tid},{b.x!r},{b.y!r},{b.w!r},{b.h!r},{src}\n")


def parse_tracks(lines: Iterable[str], where: str = "<tracks>") -> list[TrackRow]:
    out: list[TrackRow] = []
    seen: set[tuple[int, int]] = set()
    it = _iter_lines(lines)
    try:
        lineno, header = next(it)
    except StopIteration:
        raise FormatError(where, 1, "empty file, expected header") from None
    if header != TRACKS_HEADER:
        raise FormatError(where, lineno, f"expected header {TRACKS_HEADER!r}")
    for lineno, line in it:
        if not line:
            raise FormatError(where, lineno, "blank line")
        f = _split_fields(line, 7, where, lineno)
        frame = _parse_int(f[0], "frame", where, lineno)
        tid = _parse_int(f[1], "track_id", where, lineno)
        if (frame, tid) in seen:
            raise FormatError(where, lineno, f"duplicate row for frame {frame}, track {tid}")
        seen.add((frame, tid))
        coords = [_parse_float(f[i], "xywh"[i - 2], where, lineno) for i in range(2, 6)]
        if f[6] not in ("O", "H"):
            raise FormatError(where, lineno, f"source must be O or H, got {f[6]!r}")
        src = ObservationSource.OBSERVED if f[6] == "O" else ObservationSource.HYPOTHETICAL
        try:
            out.append(TrackRow(frame, tid, BoundingBox(*coords), src))
        except ValueError as exc:
            raise FormatError(where, lineno, str(exc)) from None
    return out


def parse_config(
    lines: Iterable[str],
    base: Optional[TrackerConfig] = None,
    where: str = "<config>",
) -> TrackerConfig:
    """Flat 'key = value' file; unknown keys and bad values are rejected."""
    overrides: dict = {}
    for lineno, line in _iter_lines(lines):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise FormatError(where, lineno, "expected 'key = value'")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key in _CONFIG_FLOAT_KEYS:
            overrides[key] = _parse_float(value, key, where, lineno)
        elif key in _CONFIG_INT_KEYS:
            overrides[key] = _parse_int(value, key, where, lineno)
        elif key in _CONFIG_BOOL_KEYS:
            if value.lower() not in ("true", "false"):
                raise FormatError(where, lineno, f"{key} must be true or false, got {value!r}")
            overrides[key] = value.lower() == "true"
        elif key == "appearance_mode":
            try:
                overrides[key] = AppearanceMode(value)
            except ValueError:
                raise FormatError(
                    where, lineno, f"appearance_mode must be sift, deep or none, got {value!r}"
                ) from None
        else:
            raise FormatError(where, lineno, f"unknown config key {key!r}")
    try:
        return replace(base or TrackerConfig(), **overrides)
    except ValueError as exc:
        raise FormatError(where, 0, str(exc)) from None


def write_report(report: MetricsReport, stream: TextIO):
    stream.write(f"mota = {report.mota!r}\n")
    stream.write(f"fp = {report.fp}\n")
    stream.write(f"fn = {report.fn}\n")
    stream.write(f"idsw = {report.idsw}\n")
    stream.write(f"gt_total = {report.gt_total}\n")


def parse_report(lines: Iterable[str], where: str = "<report>") -> dict[str, float]:
    out: dict[str, float] = {}
    for lineno, line in _iter_lines(lines):
        stripped = line.strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise FormatError(where, lineno, "expected 'key = value'")
        key, _, value = stripped.partition("=")
        out[key.strip()] = _parse_float(value.strip(), key.strip(), where, lineno)
    return out


@dataclass(frozen=True)
class SequenceBundle:
    """Everything known about one input sequence, indexed by frame (1-based)."""

    name: str
    frame_count: int
    frame_width: float
    frame_height: float
    detections: Mapping[int, tuple[Detection, ...]]
    features: Mapping[int, tuple[FeatureBundle, ...]]
    gt: tuple[GtEntry, ...] = ()

    def __post_init__(self):
        if self.frame_count < 1:
            raise ValueError(f"frame_count must be >= 1, got {self.frame_count}")
        for frame, dets in self.detections.items():
            if not 1 <= frame <= self.frame_count:
                raise ValueError(f"detection frame {frame} outside 1..{self.frame_count}")
            for i, d in enumerate(dets):
                if d.frame_index != frame or d.det_index != i:
                    raise ValueError(f"detection list for frame {frame} is mis-indexed")
        for frame, feats in self.features.items():
            if len(feats) != len(self.detections.get(frame, ())):
                raise ValueError(f"frame {frame}: features not aligned with detections")
        for g in self.gt:
            if not 1 <= g.frame_index <= self.frame_count:
                raise ValueError(f"gt frame {g.frame_index} outside 1..{self.frame_count}")

    def frame_detections(self, frame: int) -> tuple[Detection, ...]:
        return self.detections.get(frame, ())

    def frame_features(self, frame: int) -> tuple[FeatureBundle, ...]:
        feats = self.features.get(frame)
        if feats is None:
            return tuple(FeatureBundle() for _ in self.frame_detections(frame))
        return feats


def assemble_sequence(
    name: str,
    detections: Mapping[int, Sequence[Detection]],
    features: Optional[Mapping[tuple[int, int], FeatureBundle]] = None,
    gt: Optional[Sequence[GtEntry]] = None,
    frame_width: float = 960.0,
    frame_height: float = 540.0,
    frame_count: Optional[int] = None,
) -> SequenceBundle:
    """Join parsed detections, an optional feature sidecar and optional gt."""
    gt = list(gt or ())
    if frame_count is None:
        frames = list(detections) + [g.frame_index for g in gt]
        if not frames:
            raise ValueError("cannot infer frame_count from empty inputs")
        frame_count = max(frames)
    det_map = {f: tuple(v) for f, v in detections.items()}
    feat_map: dict[int, tuple[FeatureBundle, ...]] = {}
    if features is not None:
        for frame, det in features:
            dets = det_map.get(frame, ())
            if det >= len(dets):
                raise ValueError(
                    f"features refer to detection {det} of frame {frame}, "
                    f"which has only {len(dets)} detections"
                )
        for frame, dets in det_map.items():
            feat_map[frame] = tuple(
                features.get((frame, i), FeatureBundle()) for i in range(len(dets))
            )
    return SequenceBundle(name, frame_count, frame_width, frame_height, det_map, feat_map, tuple(gt))
