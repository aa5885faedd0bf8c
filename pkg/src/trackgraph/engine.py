"""Frame-stepping tracker: association, track lifecycle and occlusion bridging."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

from .appearance import PcaBasis, pca_fit
from .core import (
    AppearanceMode,
    BoundingBox,
    Detection,
    FeatureBundle,
    Observation,
    ObservationSource,
    Track,
    TrackState,
    TrackerConfig,
)
from .graph import GraphNode, build_graph, connected_components, solve_component

logger = logging.getLogger(__name__)


class TrackEventKind(enum.Enum):
    BORN = "born"
    EXTENDED = "extended"
    RECOVERED = "recovered"
    LOST = "lost"
    LEFT = "left"


@dataclass(frozen=True)
class TrackEvent:
    kind: TrackEventKind
    frame_index: int
    track_id: int


def center(bbox: BoundingBox) -> tuple[float, float]:
    return (bbox.x + bbox.w / 2.0, bbox.y + bbox.h / 2.0)


def velocity(track: Track, cfg: TrackerConfig) -> tuple[float, float]:
    """Average velocity in pixels per second over the track's whole history.

    With the latest observation at frame m-1 and the first at frame s, the
    center displacement is divided by the (m - s) frame span that separates
    frame m (the one being predicted) from the track's start.
    """
    if len(track.observations) < 2:
        return (0.0, 0.0)
    first = track.observations[0]
    last = track.last_observation
    span_frames = (last.frame_index + 1) - track.first_frame
    cx0, cy0 = center(first.bbox)
    cx1, cy1 = center(last.bbox)
    dt = span_frames / cfg.fps
    return ((cx1 - cx0) / dt, (cy1 - cy0) / dt)


def predict_position(track: Track, cfg: TrackerConfig) -> BoundingBox:
    """Expected box one frame ahead: last center advanced by one frame of motion.

    The literal_eq10 flag multiplies the velocity by fps instead of dividing,
    which overshoots the per-frame step by fps squared; it exists only for
    comparison runs and should normally stay off.
    """
    vx, vy = velocity(track, cfg)
    scale = cfg.fps if cfg.literal_eq10 else 1.0 / cfg.fps
    last = track.last_observation.bbox
    cx, cy = center(last)
    return BoundingBox(cx + vx * scale - last.w / 2.0, cy + vy * scale - last.h / 2.0, last.w, last.h)


def classify_missing(track: Track, cfg: TrackerConfig) -> TrackState:
    """Decide whether an unmatched track is occluded (Lost) or gone (Left).

    Left when the latest center sits within the border margin of any frame
    edge, or the track has already coasted for max_lost_frames frames.
    """
    cx, cy = center(track.last_observation.bbox)
    mx = cfg.border_margin_frac * cfg.frame_width
    my = cfg.border_margin_frac * cfg.frame_height
    near_border = cx < mx or cx > cfg.frame_width - mx or cy < my or cy > cfg.frame_height - my
    if near_border or track.lost_count >= cfg.max_lost_frames:
        return TrackState.LEFT
    return TrackState.LOST


def spawn_hypothetical(track: Track, cfg: TrackerConfig) -> Observation:
    """Placeholder observation for an occluded track at its predicted position."""
    return Observation(
        frame_index=track.last_observation.frame_index + 1,
        bbox=predict_position(track, cfg),
        source=ObservationSource.HYPOTHETICAL,
    )


class TrackerEngine:
    """Consumes per-frame detections and maintains the full track set."""

    def __init__(self, config: TrackerConfig, pca_basis: Optional[PcaBasis] = None):
        if config.appearance_mode is AppearanceMode.DEEP and pca_basis is None:
            raise ValueError("deep appearance needs a PCA basis; fit one before constructing the engine")
        self.config = config
        self.pca_basis = pca_basis
        self.tracks: dict[int, Track] = {}
        self.next_track_id = 1
        self.current_frame = 0

    @property
    def active_tracks(self) -> list[Track]:
        """Tracks still in play (Tracking or Lost), ascending id."""
        return [t for t in self.tracks.values() if t.state is not TrackState.LEFT]

    def step(
        self,
        detections: Sequence[Detection],
        features: Optional[Sequence[FeatureBundle]] = None,
    ) -> list[TrackEvent]:
        """Advance one frame; returns the lifecycle events it produced."""
        frame = self.current_frame + 1
        if features is None:
            features = [FeatureBundle() for _ in detections]
        if len(features) != len(detections):
            raise ValueError(
                f"frame {frame}: {len(detections)} detections but {len(features)} feature bundles"
            )
        for d in detections:
            if d.frame_index != frame:
                raise ValueError(f"detection carries frame {d.frame_index}, engine is at frame {frame}")

        prev_tracks = self.active_tracks
        prev_nodes = [GraphNode.for_track(t) for t in prev_tracks]
        next_nodes = [GraphNode.for_detection(d, f) for d, f in zip(detections, features)]

        graph = build_graph(prev_nodes, next_nodes, self.config, self.pca_basis)
        prev_by_ref = {node.ref: i for i, node in enumerate(prev_nodes)}
        next_by_ref = {node.ref: i for i, node in enumerate(next_nodes)}
        matched: dict[int, int] = {}  # prev index -> next index
        for comp in connected_components(graph):
            m = solve_component(comp, self.config.min_match_weight, self.config.greedy_matching)
            for lp, ln in m.pairs:
                matched[prev_by_ref[comp.prev_nodes[lp].ref]] = next_by_ref[comp.next_nodes[ln].ref]

        events: list[TrackEvent] = []
        for pi, track in enumerate(prev_tracks):
            if pi in matched:
                ni = matched[pi]
                obs = Observation(frame, detections[ni].bbox, ObservationSource.OBSERVED)
                kind = TrackEventKind.RECOVERED if track.state is TrackState.LOST else TrackEventKind.EXTENDED
                self.tracks[track.id] = track.extended(obs, features[ni])
                events.append(TrackEvent(kind, frame, track.id))
            else:
                fate = classify_missing(track, self.config)
                if fate is TrackState.LEFT:
                    self.tracks[track.id] = track.finalized()
                    events.append(TrackEvent(TrackEventKind.LEFT, frame, track.id))
                else:
                    self.tracks[track.id] = track.coasted(spawn_hypothetical(track, self.config))
                    events.append(TrackEvent(TrackEventKind.LOST, frame, track.id))

        claimed = set(matched.values())
        for ni, det in enumerate(detections):
            if ni in claimed:
                continue
            obs = Observation(frame, det.bbox, ObservationSource.OBSERVED)
            track = Track(
                id=self.next_track_id,
                observations=(obs,),
                first_frame=frame,
                state=TrackState.TRACKING,
                lost_count=0,
                last_features=features[ni],
            )
            self.tracks[track.id] = track
            self.next_track_id += 1
            events.append(TrackEvent(TrackEventKind.BORN, frame, track.id))

        self.current_frame = frame
        if events:
            logger.debug("frame %d: %s", frame, ", ".join(f"{e.kind.value}:{e.track_id}" for e in events))
        return events

    def finished_and_active(self) -> list[Track]:
        """All tracks ever created, ascending id."""
        return [self.tracks[k] for k in sorted(self.tracks)]


def fit_deep_basis(
    per_frame_features: dict[int, Sequence[FeatureBundle]],
    cfg: TrackerConfig,
) -> PcaBasis:
    """Fit the projection basis from deep vectors seen in the leading frames."""
    vectors = []
    for frame in sorted(per_frame_features):
        if frame > cfg.pca_fit_frames:
            break
        for bundle in per_frame_features[frame]:
            if bundle.deep_vector is not None:
                vectors.append(bundle.deep_vector)
    if len(vectors) < 2:
        raise ValueError(
            f"deep appearance needs at least 2 deep vectors within the first "
            f"{cfg.pca_fit_frames} frames, found {len(vectors)}"
        )
    return pca_fit(vectors, cfg.pca_fraction)
