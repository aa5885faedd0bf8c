"""Graph-based multi-object tracking over detection streams.

Detections of adjacent frames are joined into a bipartite association graph
pruned by IOU, weighted by a blend of motion and appearance, and solved per
connected component. Unmatched tracks coast on predicted positions until they
either reappear or leave the scene; output can be scored against ground truth
with CLEAR-style metrics.
"""

from .appearance import (
    PcaBasis,
    appearance_deep,
    appearance_sift,
    cosine_similarity,
    histogram_intersection,
    match_keypoints,
    pca_fit,
    pca_project,
    reduced_dim,
)
from .core import (
    LEGAL_TRANSITIONS,
    AppearanceMode,
    BoundingBox,
    Detection,
    FeatureBundle,
    Observation,
    ObservationSource,
    Track,
    TrackState,
    TrackerConfig,
    iou,
    transition,
)
from .engine import (
    TrackEvent,
    TrackEventKind,
    TrackerEngine,
    center,
    classify_missing,
    fit_deep_basis,
    predict_position,
    spawn_hypothetical,
    velocity,
)
from .graph import (
    AssociationGraph,
    GraphNode,
    Matching,
    NodeSide,
    build_graph,
    connected_components,
    edge_weight,
    max_weight_assignment,
    motion_score,
    solve_component,
)
from .io_formats import (
    FormatError,
    SequenceBundle,
    assemble_sequence,
    parse_config,
    parse_detections,
    parse_features,
    parse_gt,
    parse_report,
    parse_tracks,
    write_detections,
    write_features,
    write_gt,
    write_report,
    write_tracks,
)
from .metrics import (
    FrameAssignment,
    GtEntry,
    MetricsReport,
    MotAccumulator,
    TrackRow,
    assign_frame,
    evaluate_tracks,
    rows_from_tracks,
)
from .synth import generate_sequence

__version__ = "0.1.0"

__all__ = [
    "LEGAL_TRANSITIONS",
    "AppearanceMode",
    "AssociationGraph",
    "BoundingBox",
    "Detection",
    "FeatureBundle",
    "FormatError",
    "FrameAssignment",
    "GraphNode",
    "GtEntry",
    "Matching",
    "MetricsReport",
    "MotAccumulator",
    "NodeSide",
    "Observation",
    "ObservationSource",
    "PcaBasis",
    "SequenceBundle",
    "Track",
    "TrackEvent",
    "TrackEventKind",
    "TrackRow",
    "TrackState",
    "TrackerConfig",
    "TrackerEngine",
    "appearance_deep",
    "appearance_sift",
    "assemble_sequence",
    "assign_frame",
    "build_graph",
    "center",
    "classify_missing",
    "connected_components",
    "cosine_similarity",
    "edge_weight",
    "evaluate_tracks",
    "fit_deep_basis",
    "generate_sequence",
    "histogram_intersection",
    "iou",
    "match_keypoints",
    "max_weight_assignment",
    "motion_score",
    "parse_config",
    "parse_detections",
    "parse_features",
    "parse_gt",
    "parse_report",
    "parse_tracks",
    "pca_fit",
    "pca_project",
    "predict_position",
    "reduced_dim",
    "rows_from_tracks",
    "solve_component",
    "spawn_hypothetical",
    "transition",
    "velocity",
    "write_detections",
    "write_features",
    "write_gt",
    "write_report",
    "write_tracks",
]
