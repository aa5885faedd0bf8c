"""Feature sidecar extraction from frame images and detection boxes."""

from .features import (
    DESCRIPTOR_DIM,
    MIN_KEYPOINT_SIDE,
    DeepEmbedder,
    extract_histogram,
    extract_keypoints,
    load_deep_embedder,
)
from .job import (
    FAMILIES,
    DetectionBox,
    ExtractionJob,
    InputError,
    JobResult,
    crop_detection,
    index_frames,
    read_detections,
    run_job,
)

__version__ = "0.1.0"

__all__ = [
    "DESCRIPTOR_DIM",
    "MIN_KEYPOINT_SIDE",
    "DeepEmbedder",
    "DetectionBox",
    "ExtractionJob",
    "FAMILIES",
    "InputError",
    "JobResult",
    "crop_detection",
    "extract_histogram",
    "extract_keypoints",
    "index_frames",
    "load_deep_embedder",
    "read_detections",
    "run_job",
    "__version__",
]
