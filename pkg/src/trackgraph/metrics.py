"""CLEAR-MOT style evaluation of track output against ground truth."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .core import BoundingBox, ObservationSource, iou
from .graph import max_weight_assignment

DEFAULT_MATCH_IOU = 0.5


@dataclass(frozen=True)
class GtEntry:
    frame_index: int
    gt_id: int
    bbox: BoundingBox

    def __post_init__(self):
        if self.frame_index < 1:
            raise ValueError(f"frame_index must be >= 1, got {self.frame_index}")


@dataclass(frozen=True)
class TrackRow:
    """One tracker output row: where a track claims to be in one frame."""

    frame_index: int
    track_id: int
    bbox: BoundingBox
    source: ObservationSource


def rows_from_tracks(tracks) -> list["TrackRow"]:
    """Flatten Track objects into scoring rows, sorted by frame then id."""
    rows = [
        TrackRow(obs.frame_index, t.id, obs.bbox, obs.source)
        for t in tracks
        for obs in t.observations
    ]
    rows.sort(key=lambda r: (r.frame_index, r.track_id))
    return rows


@dataclass(frozen=True)
class FrameAssignment:
    matches: tuple[tuple[int, int], ...]  # (gt_id, track_id)
    fp: int
    fn: int
    idsw: int


@dataclass(frozen=True)
class MetricsReport:
    fp: int
    fn: int
    idsw: int
    gt_total: int

    def __post_init__(self):
        if self.gt_total <= 0:
            raise ValueError("cannot score against empty ground truth (gt_total == 0)")

    @property
    def mota(self) -> float:
        return 1.0 - (self.fn + self.fp + self.idsw) / self.gt_total


def assign_frame(
    gt: Sequence[GtEntry],
    hyp: Sequence[tuple[int, BoundingBox]],
    prev_map: Mapping[int, int],
    iou_threshold: float = DEFAULT_MATCH_IOU,
) -> FrameAssignment:
    """Match one frame's ground truth against one frame's track boxes.

    Correspondences from prev_map are kept first whenever they still overlap
    enough; the rest are assigned to maximize total IOU among pairs at or
    above the threshold. A kept or new match whose track id differs from the
    gt's previously mapped track id counts as an identity switch.
    """
    gt_ids = [g.gt_id for g in gt]
    if len(set(gt_ids)) != len(gt_ids):
        raise ValueError(f"frame {gt[0].frame_index}: duplicate gt ids")
    hyp_ids = [tid for tid, _ in hyp]
    if len(set(hyp_ids)) != len(hyp_ids):
        raise ValueError("duplicate track ids within one frame")

    gt_sorted = sorted(gt, key=lambda g: g.gt_id)
    hyp_box = dict(hyp)

    matches: dict[int, int] = {}
    claimed: set[int] = set()
    for g in gt_sorted:
        tid = prev_map.get(g.gt_id)
        if tid is None or tid in claimed or tid not in hyp_box:
            continue
        if iou(g.bbox, hyp_box[tid]) >= iou_threshold:
            matches[g.gt_id] = tid
            claimed.add(tid)

    rest_gt = [g for g in gt_sorted if g.gt_id not in matches]
    rest_hyp = sorted(t for t in hyp_box if t not in claimed)
    edges = []
    for i, g in enumerate(rest_gt):
        for j, tid in enumerate(rest_hyp):
            score = iou(g.bbox, hyp_box[tid])
            if score >= iou_threshold:
                edges.append((i, j, score))
    for i, j in max_weight_assignment(len(rest_gt), len(rest_hyp), edges):
        matches[rest_gt[i].gt_id] = rest_hyp[j]

    idsw = sum(
        1
        for gid, tid in matches.items()
        if gid in prev_map and prev_map[gid] != tid
    )
    fn = len(gt) - len(matches)
    fp = len(hyp) - len(matches)
    pairs = tuple(sorted(matches.items()))
    return FrameAssignment(pairs, fp, fn, idsw)


@dataclass
class MotAccumulator:
    """Streams frames through assign_frame and keeps the running counts."""

    iou_threshold: float = DEFAULT_MATCH_IOU
    fp: int = 0
    fn: int = 0
    idsw: int = 0
    gt_total: int = 0
    _map: dict[int, int] = field(default_factory=dict)

    def update(self, gt: Sequence[GtEntry], hyp: Sequence[tuple[int, BoundingBox]]) -> FrameAssignment:
        result = assign_frame(gt, hyp, self._map, self.iou_threshold)
        self.fp += result.fp
        self.fn += result.fn
        self.idsw += result.idsw
        self.gt_total += len(gt)
        for gid, tid in result.matches:
            self._map[gid] = tid
        return result

    def report(self) -> MetricsReport:
        return MetricsReport(self.fp, self.fn, self.idsw, self.gt_total)


def evaluate_tracks(
    gt_entries: Iterable[GtEntry],
    rows: Iterable[TrackRow],
    include_hypothetical: bool = True,
    iou_threshold: float = DEFAULT_MATCH_IOU,
) -> MetricsReport:
    """Score a whole sequence; hypothetical rows can be excluded from scoring."""
    gt_by_frame: dict[int, list[GtEntry]] = {}
    for g in gt_entries:
        gt_by_frame.setdefault(g.frame_index, []).append(g)
    hyp_by_frame: dict[int, list[tuple[int, BoundingBox]]] = {}
    for r in rows:
        if not include_hypothetical and r.source is ObservationSource.HYPOTHETICAL:
            continue
        hyp_by_frame.setdefault(r.frame_index, []).append((r.track_id, r.bbox))

    acc = MotAccumulator(iou_threshold)
    for frame in sorted(set(gt_by_frame) | set(hyp_by_frame)):
        acc.update(gt_by_frame.get(frame, []), hyp_by_frame.get(frame, []))
    return acc.report()
