"""Per-crop feature functions: histogram binning, keypoint descriptors and
the optional deep embedder."""

import logging

import numpy as np
import pytest

from conftest import make_textures
from trackgraph_extractor.features import (
    DESCRIPTOR_DIM,
    MIN_KEYPOINT_SIDE,
    DeepEmbedder,
    extract_histogram,
    extract_keypoints,
    load_deep_embedder,
)


class TestExtractHistogram:
    def test_uniform_crop_fills_a_single_bin(self):
        crop = np.full((5, 4, 3), 17, dtype=np.uint8)
        hist = extract_histogram(crop, bins_per_channel=8)
        assert hist.shape == (512,)
        assert hist.dtype == np.float64
        # channel value 17 lands in bin (17 * 8) >> 8 = 0 on every channel
        assert hist[0] == 20.0
        assert np.count_nonzero(hist) == 1

    def test_total_count_equals_pixel_count(self):
        rng = np.random.default_rng(7)
        crop = rng.integers(0, 256, size=(13, 9, 3), dtype=np.uint8)
        for bins in (1, 3, 8, 256):
            hist = extract_histogram(crop, bins_per_channel=bins)
            assert hist.shape == (bins**3,)
            assert hist.sum() == 13 * 9

    def test_extreme_colors_land_in_opposite_corners(self):
        black = np.zeros((2, 2, 3), dtype=np.uint8)
        white = np.full((2, 2, 3), 255, dtype=np.uint8)
        assert extract_histogram(black, 8)[0] == 4.0
        assert extract_histogram(white, 8)[511] == 4.0

    def test_identity_binning_with_256_bins(self):
        crop = np.full((1, 1, 3), 200, dtype=np.uint8)
        hist = extract_histogram(crop, bins_per_channel=256)
        idx = (200 * 256 + 200) * 256 + 200
        assert hist[idx] == 1.0
        assert hist.sum() == 1.0

    def test_identical_crops_give_identical_histograms(self):
        texture = make_textures()[0]
        assert np.array_equal(extract_histogram(texture), extract_histogram(texture.copy()))

    @pytest.mark.parametrize(
        "crop, message",
        [
            (np.zeros((4, 4), dtype=np.uint8), "must be HxWx3"),
            (np.zeros((4, 4, 4), dtype=np.uint8), "must be HxWx3"),
            (np.zeros((0, 4, 3), dtype=np.uint8), "empty crop"),
            (np.zeros((4, 4, 3), dtype=np.float64), "must be uint8"),
        ],
    )
    def test_rejects_malformed_crops(self, crop, message):
        with pytest.raises(ValueError, match=message):
            extract_histogram(crop)

    @pytest.mark.parametrize("bins", [0, -1, 257])
    def test_rejects_bad_bin_counts(self, bins):
        crop = np.zeros((2, 2, 3), dtype=np.uint8)
        with pytest.raises(ValueError, match="bins_per_channel must lie in 1..256"):
            extract_histogram(crop, bins_per_channel=bins)


class TestExtractKeypoints:
    def test_featureless_crop_gives_empty_descriptor_set(self):
        blank = np.full((48, 64, 3), 60, dtype=np.uint8)
        descriptors = extract_keypoints(blank)
        assert descriptors.shape == (0, DESCRIPTOR_DIM)

    def test_textured_crop_gives_descriptors(self):
        descriptors = extract_keypoints(make_textures()[0])
        assert descriptors.ndim == 2
        assert descriptors.shape[0] > 0
        assert descriptors.shape[1] == DESCRIPTOR_DIM
        assert descriptors.dtype == np.float64

    def test_deterministic_on_identical_pixels(self):
        texture = make_textures()[1]
        assert np.array_equal(extract_keypoints(texture), extract_keypoints(texture.copy()))

    @pytest.mark.parametrize(
        "shape",
        [
            (MIN_KEYPOINT_SIDE - 1, 64, 3),
            (48, MIN_KEYPOINT_SIDE - 1, 3),
            (MIN_KEYPOINT_SIDE - 1, MIN_KEYPOINT_SIDE - 1, 3),
        ],
    )
    def test_undersized_crops_give_empty_descriptor_set(self, shape):
        rng = np.random.default_rng(3)
        crop = rng.integers(0, 256, size=shape, dtype=np.uint8)
        assert extract_keypoints(crop).shape == (0, DESCRIPTOR_DIM)

    def test_grayscale_input_matches_color_path(self):
        import cv2

        texture = make_textures()[0]
        gray = cv2.cvtColor(texture, cv2.COLOR_BGR2GRAY)
        assert np.array_equal(extract_keypoints(texture), extract_keypoints(gray))

    @pytest.mark.parametrize(
        "crop",
        [np.zeros((4, 4, 4), dtype=np.uint8), np.zeros(16, dtype=np.uint8)],
    )
    def test_rejects_malformed_crops(self, crop):
        with pytest.raises(ValueError, match="must be HxWx3 or HxW"):
            extract_keypoints(crop)


class TestDeepEmbedder:
    def test_loader_returns_embedder_or_degrades_with_warning(self, caplog):
        """The pretrained backbone may be unavailable (no weights on disk and
        no network); the loader must then warn and return None instead of
        raising, and otherwise yield a working embedder."""
        with caplog.at_level(logging.WARNING, logger="trackgraph_extractor.features"):
            embedder = load_deep_embedder()
        if embedder is None:
            assert any(
                "deep features unavailable" in record.getMessage()
                for record in caplog.records
            )
        else:
            assert isinstance(embedder, DeepEmbedder)
            assert embedder.dim > 0
            vector = embedder.embed(make_textures()[0])
            assert vector.shape == (embedder.dim,)
            assert vector.dtype == np.float64
