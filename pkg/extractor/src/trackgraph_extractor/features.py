"""Per-crop feature computation: joint color histogram, scale-invariant
keypoint descriptors, and an optional deep embedding from a pretrained
backbone."""

from __future__ import annotations

import logging
from typing import Optional

import cv2
import numpy as np

logger = logging.getLogger(__name__)

DESCRIPTOR_DIM = 128
MIN_KEYPOINT_SIDE = 8


def extract_histogram(crop: np.ndarray, bins_per_channel: int = 8) -> np.ndarray:
    """Joint 3-channel histogram: bins_per_channel**3 counts summing to the pixel count.

    Channel values are binned uniformly over 0..255; a pixel lands in exactly
    one joint bin, so a uniform single-color crop fills a single bin.
    """
    arr = np.asarray(crop)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"crop must be HxWx3 pixels, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("cannot build a histogram from an empty crop")
    if arr.dtype != np.uint8:
        raise ValueError(f"crop must be uint8 pixels, got {arr.dtype}")
    if not 1 <= bins_per_channel <= 256:
        raise ValueError(f"bins_per_channel must lie in 1..256, got {bins_per_channel}")
    idx = (arr.astype(np.int64) * bins_per_channel) >> 8
    flat = (idx[..., 0] * bins_per_channel + idx[..., 1]) * bins_per_channel + idx[..., 2]
    counts = np.bincount(flat.ravel(), minlength=bins_per_channel**3)
    return counts.astype(np.float64)


def extract_keypoints(crop: np.ndarray) -> np.ndarray:
    """Keypoint descriptors of the crop, one 128-dim row per keypoint.

    Crops smaller than MIN_KEYPOINT_SIDE on either side, and featureless
    crops, give an empty (0, 128) array; that is a valid result, not an
    error. Output is deterministic for a fixed OpenCV version.
    """
    arr = np.asarray(crop)
    if arr.ndim == 3:
        if arr.shape[2] != 3:
            raise ValueError(f"crop must be HxWx3 or HxW pixels, got shape {arr.shape}")
        gray = cv2.cvtColor(arr, cv2.COLOR_BGR2GRAY)
    elif arr.ndim == 2:
        gray = arr
    else:
        raise ValueError(f"crop must be HxWx3 or HxW pixels, got shape {arr.shape}")
    if gray.shape[0] < MIN_KEYPOINT_SIDE or gray.shape[1] < MIN_KEYPOINT_SIDE:
        return np.zeros((0, DESCRIPTOR_DIM))
    _, descriptors = cv2.SIFT_create().detectAndCompute(gray, None)
    if descriptors is None:
        return np.zeros((0, DESCRIPTOR_DIM))
    return descriptors.astype(np.float64)


class DeepEmbedder:
    """Pretrained backbone wrapper producing one flat vector per crop.

    The crop runs through the backbone's convolutional stack; the pre-pooling
    feature map is average-pooled to a fixed 7x7 grid and flattened
    row-major, so the output dimension is constant across crop sizes.
    """

    POOL = 7
    INPUT_SIDE = 224

    def __init__(self, backbone, mean: np.ndarray, std: np.ndarray, dim: int):
        self._backbone = backbone
        self._mean = mean
        self._std = std
        self.dim = dim

    def embed(self, crop: np.ndarray) -> np.ndarray:
        import torch

        arr = np.asarray(crop)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.size == 0:
            raise ValueError(f"crop must be non-empty HxWx3 pixels, got shape {arr.shape}")
        rgb = cv2.cvtColor(arr, cv2.COLOR_BGR2RGB)
        resized = cv2.resize(rgb, (self.INPUT_SIDE, self.INPUT_SIDE), interpolation=cv2.INTER_LINEAR)
        scaled = (resized.astype(np.float32) / 255.0 - self._mean) / self._std
        tensor = torch.from_numpy(scaled.transpose(2, 0, 1)).unsqueeze(0)
        with torch.no_grad():
            fmap = self._backbone(tensor)
            pooled = torch.nn.functional.adaptive_avg_pool2d(fmap, (self.POOL, self.POOL))
        return pooled.squeeze(0).numpy().astype(np.float64).reshape(-1)


def load_deep_embedder() -> Optional[DeepEmbedder]:
    """Build the deep embedder, or return None (with a warning) when the
    pretrained model cannot be loaded; callers then fall back to
    histogram+keypoints."""
    try:
        import torch
        import torchvision

        weights = torchvision.models.ResNet18_Weights.DEFAULT
        model = torchvision.models.resnet18(weights=weights)
        backbone = torch.nn.Sequential(*list(model.children())[:-2]).eval()
        with torch.no_grad():
            probe = backbone(torch.zeros(1, 3, DeepEmbedder.INPUT_SIDE, DeepEmbedder.INPUT_SIDE))
        dim = int(probe.shape[1]) * DeepEmbedder.POOL * DeepEmbedder.POOL
    except Exception as exc:
        logger.warning(
            "deep features unavailable (%s); falling back to histogram+keypoints", exc
        )
        return None
    mean = np.array([0.485, 0.456, 0.406], dtype=np.float32)
    std = np.array([0.229, 0.224, 0.225], dtype=np.float32)
    return DeepEmbedder(backbone, mean, std, dim)
