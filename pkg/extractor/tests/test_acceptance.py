"""End-to-end acceptance: the extractor's sidecar must drive the tracker.

B1: the sidecar written for the six-frame fixture parses cleanly with the
    tracker's own reader, identical crops agree (histogram intersection at
    least 0.99, keypoint self-match count equal to the keypoint count) and
    descriptors survive a 90-degree rotation at a 50% match rate.
B2: the tracker consumes the fixture detections plus the sidecar in its
    keypoint+histogram appearance mode and holds two stable ids across all
    six frames.
"""

import numpy as np
import pytest

from conftest import (
    EXPECTED_KEYS,
    FRAME_COUNT,
    FRAME_H,
    FRAME_W,
    OBJECTS,
    make_textures,
    object_position,
)
from trackgraph import (
    histogram_intersection,
    match_keypoints,
    parse_features,
    parse_tracks,
)
from trackgraph.cli import main as run_tracker_cli
from trackgraph_extractor import ExtractionJob, extract_keypoints, run_job

# the tracker's default two-NN distance-ratio for keypoint matching
RATIO = 0.8


@pytest.fixture(scope="module")
def sidecar(sequence_dir, tmp_path_factory):
    path = tmp_path_factory.mktemp("features") / "sequence.features.jsonl"
    run_job(
        ExtractionJob(
            frames_dir=sequence_dir / "frames",
            detections_csv=sequence_dir / "detections.csv",
            output_path=path,
        )
    )
    return path


@pytest.fixture(scope="module")
def bundles(sidecar):
    with open(sidecar, encoding="utf-8") as fh:
        return parse_features(fh, where=str(sidecar))


class TestB1SidecarAgreement:
    def test_sidecar_parses_cleanly_in_the_tracker(self, bundles):
        assert set(bundles) == EXPECTED_KEYS
        for bundle in bundles.values():
            assert bundle.histogram is not None
            assert bundle.histogram.shape == (512,)
            assert bundle.descriptors is not None
            assert bundle.descriptors.shape[1] == 128

    def test_identical_crops_agree(self, bundles):
        intersections = []
        matches = []
        for det in range(len(OBJECTS)):
            first = bundles[(1, det)]
            for frame in range(2, FRAME_COUNT + 1):
                later = bundles[(frame, det)]
                intersections.append(
                    histogram_intersection(first.histogram, later.histogram)
                )
                assert np.array_equal(first.descriptors, later.descriptors)
            count = first.descriptors.shape[0]
            assert count > 0
            matches.append((match_keypoints(first.descriptors, first.descriptors, RATIO), count))

        assert min(intersections) >= 0.99
        for matched, count in matches:
            assert matched == count
        print(
            f"B1 PASS — sidecar parses; histogram intersection "
            f">= {min(intersections):.3f} across frames; keypoint self-matches "
            + ", ".join(f"{m}/{c}" for m, c in matches)
        )

    def test_descriptors_survive_rotation(self):
        for texture in make_textures():
            upright = extract_keypoints(texture)
            rotated = extract_keypoints(np.rot90(texture).copy())
            assert rotated.shape[0] > 0
            matched = match_keypoints(rotated, upright, RATIO)
            assert matched >= 0.5 * rotated.shape[0]


class TestB2TrackerIntegration:
    def test_tracker_holds_stable_ids_across_the_sequence(
        self, sequence_dir, sidecar, tmp_path
    ):
        tracks_csv = tmp_path / "tracks.csv"
        code = run_tracker_cli(
            [
                "track",
                str(sequence_dir / "detections.csv"),
                "--features",
                str(sidecar),
                "--output",
                str(tracks_csv),
                "--appearance",
                "sift",
                "--frame-width",
                str(FRAME_W),
                "--frame-height",
                str(FRAME_H),
            ]
        )
        assert code == 0

        with open(tracks_csv, encoding="utf-8") as fh:
            rows = parse_tracks(fh, where=str(tracks_csv))
        by_id: dict[int, list] = {}
        for row in rows:
            by_id.setdefault(row.track_id, []).append(row)
        assert len(by_id) == len(OBJECTS)

        for track_rows in by_id.values():
            track_rows.sort(key=lambda r: r.frame_index)
            assert [r.frame_index for r in track_rows] == list(range(1, FRAME_COUNT + 1))
            assert all(r.source.value == "O" for r in track_rows)
            # every row of one track sits exactly on one object's path
            start = (track_rows[0].bbox.x, track_rows[0].bbox.y)
            index = next(
                i for i in range(len(OBJECTS)) if object_position(i, 1) == start
            )
            for row in track_rows:
                assert (row.bbox.x, row.bbox.y) == object_position(index, row.frame_index)

        print(
            f"B2 PASS — {len(by_id)} stable tracks over {FRAME_COUNT} frames, "
            f"every row observed, ids {sorted(by_id)}"
        )
