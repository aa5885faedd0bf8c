"""Core domain types shared by every stage of the tracker, plus axis-aligned IOU."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box: top-left corner plus width/height, in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"bounding box field {name!r} is not finite: {v}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"bounding box needs positive size, got w={self.w}, h={self.h}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes; 0.0 when they are disjoint.

    Areas are taken from the same rounded extents as the overlap so the
    result stays in [0, 1] and identical boxes score exactly 1.
    """
    ox = min(a.x2, b.x2) - max(a.x, b.x)
    oy = min(a.y2, b.y2) - max(a.y, b.y)
    if ox <= 0 or oy <= 0:
        return 0.0
    inter = ox * oy
    area_a = (a.x2 - a.x) * (a.y2 - a.y)
    area_b = (b.x2 - b.x) * (b.y2 - b.y)
    return inter / (area_a + area_b - inter)


@dataclass(frozen=True)
class Detection:
    """One detector response: a box with confidence in a specific frame."""

    frame_index: int
    det_index: int
    bbox: BoundingBox
    confidence: float

    def __post_init__(self):
        if self.frame_index < 1:
            raise ValueError(f"frame_index must be >= 1, got {self.frame_index}")
        if self.det_index < 0:
            raise ValueError(f"det_index must be >= 0, got {self.det_index}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0,1], got {self.confidence}")


def _readonly_f64(arr, ndim: int, what: str) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != ndim:
        raise ValueError(f"{what} must be {ndim}-dimensional, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{what} contains non-finite values")
    out = out.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class FeatureBundle:
    """Per-detection appearance data; any subset of the three families may be present."""

    histogram: Optional[np.ndarray] = None
    descriptors: Optional[np.ndarray] = None  # shape (n_keypoints, dim)
    deep_vector: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.histogram is not None:
            h = _readonly_f64(self.histogram, 1, "histogram")
            if np.any(h < 0):
                raise ValueError("histogram entries must be non-negative")
            object.__setattr__(self, "histogram", h)
        if self.descriptors is not None:
            d = _readonly_f64(self.descriptors, 2, "descriptors")
            object.__setattr__(self, "descriptors", d)
        if self.deep_vector is not None:
            v = _readonly_f64(self.deep_vector, 1, "deep_vector")
            object.__setattr__(self, "deep_vector", v)

    def __eq__(self, other):
        if not isinstance(other, FeatureBundle):
            return NotImplemented
        return all(
            (a is None and b is None) or (a is not None and b is not None and np.array_equal(a, b))
            for a, b in (
                (self.histogram, other.histogram),
                (self.descriptors, other.descriptors),
                (self.deep_vector, other.deep_vector),
            )
        )

    @property
    def is_empty(self) -> bool:
        return self.histogram is None and self.descriptors is None and self.deep_vector is None


class TrackState(enum.Enum):
    TRACKING = "tracking"
    LOST = "lost"
    LEFT = "left"


# Left is terminal; staying in a state is not a transition.
LEGAL_TRANSITIONS = frozenset(
    {
        (TrackState.TRACKING, TrackState.LOST),
        (TrackState.TRACKING, TrackState.LEFT),
        (TrackState.LOST, TrackState.TRACKING),
        (TrackState.LOST, TrackState.LEFT),
    }
)


def transition(current: TrackState, target: TrackState) -> TrackState:
    """Validate a lifecycle state change; raises ValueError on any illegal pair."""
    if (current, target) not in LEGAL_TRANSITIONS:
        raise ValueError(f"illegal track state transition {current.value} -> {target.value}")
    return target


class ObservationSource(enum.Enum):
    OBSERVED = "O"
    HYPOTHETICAL = "H"


@dataclass(frozen=True)
class Observation:
    """A track's position claim in one frame, real or extrapolated."""

    frame_index: int
    bbox: BoundingBox
    source: ObservationSource


@dataclass(frozen=True)
class Track:
    """One identity over time: contiguous observation history plus lifecycle state."""

    id: int
    observations: tuple[Observation, ...]
    first_frame: int
    state: TrackState
    lost_count: int
    last_features: FeatureBundle

    def __post_init__(self):
        if not self.observations:
            raise ValueError("a track needs at least one observation")
        if self.first_frame != self.observations[0].frame_index:
            raise ValueError("first_frame must equal the first observation's frame")
        if self.observations[0].source is not ObservationSource.OBSERVED:
            raise ValueError("a track must start from a real observation")
        for prev, nxt in zip(self.observations, self.observations[1:]):
            if nxt.frame_index != prev.frame_index + 1:
                raise ValueError(f"track {self.id} observations must cover contiguous frames")
        if self.state is TrackState.TRACKING and self.lost_count != 0:
            raise ValueError("lost_count must be 0 while in the tracking state")
        if self.lost_count < 0:
            raise ValueError("lost_count must be >= 0")

    @property
    def last_observation(self) -> Observation:
        return self.observations[-1]

    @property
    def last_frame(self) -> int:
        return self.observations[-1].frame_index

    def extended(self, obs: Observation, features: FeatureBundle) -> "Track":
        """New track with a real observation appended; returns to the tracking state."""
        state = self.state if self.state is TrackState.TRACKING else transition(self.state, TrackState.TRACKING)
        return replace(
            self,
            observations=self.observations + (obs,),
            state=state,
            lost_count=0,
            last_features=features,
        )

    def coasted(self, obs: Observation) -> "Track":
        """New track with a hypothetical observation appended; features stay frozen."""
        state = self.state if self.state is TrackState.LOST else transition(self.state, TrackState.LOST)
        return replace(
            self,
            observations=self.observations + (obs,),
            state=state,
            lost_count=self.lost_count + 1,
        )

    def finalized(self) -> "Track":
        """New track marked as having left the scene (terminal)."""
        return replace(self, state=transition(self.state, TrackState.LEFT))


class AppearanceMode(enum.Enum):
    SIFT_HIST = "sift"
    DEEP = "deep"
    NONE = "none"


@dataclass(frozen=True)
class TrackerConfig:
    """Every knob of the tracker; defaults follow the reference setup (25 fps, 960x540)."""

    alpha: float = 0.5
    beta: float = 0.5
    iou_prune_threshold: float = 0.6
    appearance_mode: AppearanceMode = AppearanceMode.SIFT_HIST
    fps: float = 25.0
    max_lost_frames: int = 25
    border_margin_frac: float = 0.05
    hist_bins_per_channel: int = 8
    knn_ratio: float = 0.8
    pca_fraction: float = 0.1
    sift_match_normalization: bool = True
    frame_width: float = 960.0
    frame_height: float = 540.0
    min_match_weight: float = 0.0
    literal_eq10: bool = False
    greedy_matching: bool = False
    pca_fit_frames: int = 50

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.alpha + self.beta <= 0:
            raise ValueError("alpha + beta must be positive")
        if not 0.0 <= self.iou_prune_threshold <= 1.0:
            raise ValueError("iou_prune_threshold must lie in [0,1]")
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        if self.max_lost_frames < 0:
            raise ValueError("max_lost_frames must be >= 0")
        if not 0.0 <= self.border_margin_frac <= 0.5:
            raise ValueError("border_margin_frac must lie in [0, 0.5]")
        if self.hist_bins_per_channel < 2:
            raise ValueError("hist_bins_per_channel must be >= 2")
        if not 0.0 < self.knn_ratio <= 1.0:
            raise ValueError("knn_ratio must lie in (0,1]")
        if not 0.0 < self.pca_fraction <= 1.0:
            raise ValueError("pca_fraction must lie in (0,1]")
        if self.frame_width <= 0 or self.frame_height <= 0:
            raise ValueError("frame dimensions must be positive")
        if self.min_match_weight < 0:
            raise ValueError("min_match_weight must be >= 0")
        if self.pca_fit_frames < 1:
            raise ValueError("pca_fit_frames must be >= 1")
