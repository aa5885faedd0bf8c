"""Appearance scoring: histogram intersection + keypoint matching, and
PCA-reduced deep-feature cosine similarity."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import FeatureBundle, TrackerConfig

logger = logging.getLogger(__name__)

_ZERO_NORM_EPS = 1e-12


def histogram_intersection(h1, h2) -> float:
    """Overlap of two bin-count histograms, normalized by the larger total mass."""
    a = np.asarray(h1, dtype=np.float64)
    b = np.asarray(h2, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"histogram length mismatch: {a.shape} vs {b.shape}")
    denom = max(a.sum(), b.sum())
    if denom <= 0:
        raise ValueError("histogram intersection is undefined when both histograms are empty")
    return float(np.minimum(a, b).sum() / denom)


def match_keypoints(ds_a, ds_b, ratio: float) -> int:
    """Count descriptors of ds_a whose nearest neighbour in ds_b passes the
    two-NN distance-ratio test (a lone neighbour always passes)."""
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"ratio must lie in (0,1], got {ratio}")
    a = np.asarray(ds_a, dtype=np.float64)
    b = np.asarray(ds_b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        return 0
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("descriptor sets must be 2-dimensional arrays")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"descriptor dimension mismatch: {a.shape[1]} vs {b.shape[1]}")

    # Squared Euclidean distances, (nA, nB); monotone in the true distance so
    # the ratio test is applied on square roots below.
    d2 = np.maximum(
        (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T),
        0.0,
    )
    if b.shape[0] == 1:
        return int(a.shape[0])
    part = np.partition(d2, 1, axis=1)[:, :2]
    nearest = np.sqrt(part.min(axis=1))
    second = np.sqrt(part.max(axis=1))
    return int(np.count_nonzero(nearest <= ratio * second))


def appearance_sift(a: FeatureBundle, b: FeatureBundle, cfg: TrackerConfig) -> float:
    """Keypoint match count times histogram intersection; match count is
    normalized into [0,1] unless cfg.sift_match_normalization is off."""
    for name, bundle in (("first", a), ("second", b)):
        if bundle.histogram is None:
            raise ValueError(f"{name} bundle is missing its histogram")
        if bundle.descriptors is None:
            raise ValueError(f"{name} bundle is missing its descriptors")
    n = match_keypoints(a.descriptors, b.descriptors, cfg.knn_ratio)
    inter = histogram_intersection(a.histogram, b.histogram)
    if cfg.sift_match_normalization:
        # Normalizing by the smaller keypoint count keeps the score in [0,1];
        # many-to-one matches can push the ratio above 1, so clamp.
        n_norm = n / max(1, min(a.descriptors.shape[0], b.descriptors.shape[0]))
        return min(n_norm, 1.0) * inter
    return n * inter


def cosine_similarity(f1, f2) -> float:
    """Cosine of the angle between two feature vectors."""
    a = np.asarray(f1, dtype=np.float64)
    b = np.asarray(f2, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"feature dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity is undefined for a zero-norm vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def reduced_dim(d: int, fraction: float) -> int:
    """Target component count: ceil(fraction * d), clamped to [1, d]."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0,1], got {fraction}")
    # Guard against float dust: 0.1 * 250 evaluates just above 25.0.
    k = math.ceil(fraction * d - 1e-9)
    return max(1, min(d, k))


@dataclass(frozen=True)
class PcaBasis:
    """Frozen projection onto the top principal directions of a feature population."""

    mean: np.ndarray
    components: np.ndarray  # shape (k, d), rows orthonormal

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        comps = np.asarray(self.components, dtype=np.float64)
        if mean.ndim != 1 or comps.ndim != 2 or comps.shape[1] != mean.shape[0]:
            raise ValueError("basis mean and components have inconsistent shapes")
        k, d = comps.shape
        if not 1 <= k <= d:
            raise ValueError(f"component count must lie in [1, {d}], got {k}")
        gram = comps @ comps.T
        if not np.allclose(gram, np.eye(k), atol=1e-8):
            raise ValueError("components are not orthonormal")
        mean = mean.copy()
        comps = comps.copy()
        mean.flags.writeable = False
        comps.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "components", comps)

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def output_dim(self) -> int:
        return self.components.shape[0]


def _first_nonzero_index(v: np.ndarray) -> int:
    idx = np.nonzero(np.abs(v) > 1e-12)[0]
    return int(idx[0]) if idx.size else v.shape[0]


def _fix_signs(components: np.ndarray) -> np.ndarray:
    out = components.copy()
    for row in out:
        i = _first_nonzero_index(row)
        if i < row.shape[0] and row[i] < 0:
            row *= -1.0
    return out


def pca_fit(samples: Sequence, fraction: float) -> PcaBasis:
    """Fit a PCA basis keeping ceil(fraction * d) components.

    Components are ordered by descending variance; equal-variance groups are
    ordered by the index of each component's first nonzero coordinate, and each
    component's first nonzero coordinate is made positive. When the data spans
    fewer directions than requested, the basis is completed deterministically
    by Gram-Schmidt against the standard basis.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("samples must form a 2-dimensional array")
    n, d = x.shape
    if n < 2:
        raise ValueError(f"PCA needs at least 2 samples, got {n}")
    k = reduced_dim(d, fraction)

    mean = x.mean(axis=0)
    centered = x - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    vt = _fix_signs(vt)

    # Stable ordering inside groups of (numerically) equal singular values.
    order = list(range(len(svals)))
    tol = 1e-10 * max(float(svals[0]), 1.0) if len(svals) else 0.0
    order.sort(key=lambda i: (-round(float(svals[i]) / tol) if tol > 0 else 0, _first_nonzero_index(vt[i])))
    vt = vt[order]

    rows = [vt[i] for i in range(min(k, vt.shape[0]))]
    if len(rows) < k:
        rows = _complete_basis(rows, d, k)
    return PcaBasis(mean=mean, components=np.array(rows))


def _complete_basis(rows: list[np.ndarray], d: int, k: int) -> list[np.ndarray]:
    """Extend orthonormal rows to k vectors using standard basis directions."""
    rows = list(rows)
    for i in range(d):
        if len(rows) == k:
            break
        v = np.zeros(d)
        v[i] = 1.0
        for r in rows:
            v -= (r @ v) * r
        norm = np.linalg.norm(v)
        if norm > 1e-10:
            rows.append(v / norm)
    if len(rows) < k:
        raise ValueError("could not complete an orthonormal basis")
    return rows


def pca_project(v, basis: PcaBasis) -> np.ndarray:
    """Project a feature vector onto the basis (centering first)."""
    vec = np.asarray(v, dtype=np.float64)
    if vec.shape != basis.mean.shape:
        raise ValueError(f"vector dimension {vec.shape} does not match basis dimension {basis.mean.shape}")
    return basis.components @ (vec - basis.mean)


def appearance_deep(a: FeatureBundle, b: FeatureBundle, basis: PcaBasis) -> float:
    """Cosine similarity of the PCA-reduced deep features, clamped below at 0."""
    for name, bundle in (("first", a), ("second", b)):
        if bundle.deep_vector is None:
            raise ValueError(f"{name} bundle is missing its deep_vector")
    pa = pca_project(a.deep_vector, basis)
    pb = pca_project(b.deep_vector, basis)
    if np.linalg.norm(pa) < _ZERO_NORM_EPS or np.linalg.norm(pb) < _ZERO_NORM_EPS:
        logger.debug("deep feature projected to (near) zero norm; scoring 0")
        return 0.0
    return max(0.0, cosine_similarity(pa, pb))
