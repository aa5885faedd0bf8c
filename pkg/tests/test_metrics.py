import io

import pytest

from trackgraph import (
    BoundingBox,
    GtEntry,
    MetricsReport,
    MotAccumulator,
    ObservationSource,
    TrackerConfig,
    TrackRow,
    assign_frame,
    evaluate_tracks,
    generate_sequence,
    rows_from_tracks,
    write_report,
)
from trackgraph.cli import _run_tracker

BOX_A = BoundingBox(100, 100, 20, 20)
BOX_B = BoundingBox(400, 100, 20, 20)
BOX_C = BoundingBox(100, 400, 20, 20)


def gt(frame, gid, box):
    return GtEntry(frame, gid, box)


def row(frame, tid, box, source=ObservationSource.OBSERVED):
    return TrackRow(frame, tid, box, source)


class TestAssignFrame:
    def test_identical_boxes_match_cleanly(self):
        g = [gt(1, 1, BOX_A), gt(1, 2, BOX_B)]
        h = [(10, BOX_A), (20, BOX_B)]
        result = assign_frame(g, h, {})
        assert result.matches == ((1, 10), (2, 20))
        assert (result.fp, result.fn, result.idsw) == (0, 0, 0)

    def test_no_hypotheses_means_all_misses(self):
        result = assign_frame([gt(1, 1, BOX_A), gt(1, 2, BOX_B)], [], {})
        assert (result.fp, result.fn, result.idsw) == (0, 2, 0)

    def test_below_threshold_does_not_match(self):
        shifted = BoundingBox(114, 100, 20, 20)  # IOU 6/34 with BOX_A
        result = assign_frame([gt(1, 1, BOX_A)], [(10, shifted)], {})
        assert result.matches == ()
        assert (result.fp, result.fn) == (1, 1)

    def test_switch_counts_once(self):
        result = assign_frame([gt(2, 1, BOX_A)], [(20, BOX_A)], {1: 10})
        assert result.matches == ((1, 20),)
        assert result.idsw == 1

    def test_persistent_match_beats_a_better_newcomer(self):
        nudged = BoundingBox(104, 100, 20, 20)  # IOU 2/3 with BOX_A
        result = assign_frame([gt(2, 1, BOX_A)], [(10, nudged), (20, BOX_A)], {1: 10})
        assert result.matches == ((1, 10),)
        assert result.idsw == 0
        assert result.fp == 1

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError, match="duplicate gt ids"):
            assign_frame([gt(1, 1, BOX_A), gt(1, 1, BOX_B)], [], {})
        with pytest.raises(ValueError, match="duplicate track ids"):
            assign_frame([gt(1, 1, BOX_A)], [(10, BOX_A), (10, BOX_B)], {})

    def test_maximizes_total_overlap(self):
        # Track 10 overlaps both gts; the pairing must leave nothing stranded.
        near_a = BoundingBox(105, 100, 20, 20)
        g = [gt(1, 1, BOX_A), gt(1, 2, near_a)]
        h = [(10, BoundingBox(102, 100, 20, 20)), (20, near_a)]
        result = assign_frame(g, h, {})
        assert result.matches == ((1, 10), (2, 20))
        assert result.fn == 0


class TestMetricsReport:
    def test_rejects_empty_ground_truth(self):
        with pytest.raises(ValueError, match="empty ground truth"):
            MetricsReport(0, 0, 0, 0)

    def test_pinned_mota_is_exact(self):
        report = MetricsReport(fp=1, fn=2, idsw=1, gt_total=10)
        assert report.mota == 0.6
        buf = io.StringIO()
        write_report(report, buf)
        assert "mota = 0.6\n" in buf.getvalue()

    def test_mota_can_go_negative(self):
        assert MetricsReport(fp=8, fn=3, idsw=1, gt_total=10).mota == pytest.approx(-0.2)


class TestAccumulator:
    def test_two_frame_switch(self):
        acc = MotAccumulator()
        acc.update([gt(1, 1, BOX_A)], [(10, BOX_A)])
        acc.update([gt(2, 1, BOX_A)], [(20, BOX_A)])
        report = acc.report()
        assert (report.fp, report.fn, report.idsw, report.gt_total) == (0, 0, 1, 2)
        assert report.mota == pytest.approx(0.5)

    def test_map_survives_a_silent_frame(self):
        acc = MotAccumulator()
        acc.update([gt(1, 1, BOX_A)], [(10, BOX_A)])
        acc.update([gt(2, 1, BOX_A)], [])
        acc.update([gt(3, 1, BOX_A)], [(10, BOX_A)])
        assert acc.report().idsw == 0


def pinned_counts_fixture():
    """Three frames engineered to produce fp=1, fn=2, idsw=1 over gt_total=10."""
    gt_entries = [
        gt(1, 1, BOX_A), gt(1, 2, BOX_B), gt(1, 3, BOX_C),
        gt(2, 1, BOX_A), gt(2, 2, BOX_B), gt(2, 3, BOX_C),
        gt(3, 1, BOX_A), gt(3, 2, BOX_B), gt(3, 3, BOX_C), gt(3, 4, BoundingBox(400, 400, 20, 20)),
    ]
    rows = [
        # Frame 1: all three matched.
        row(1, 10, BOX_A), row(1, 20, BOX_B), row(1, 30, BOX_C),
        # Frame 2: gt 1 switches to track 40, gt 3 unmatched (fn), stray box (fp).
        row(2, 40, BOX_A), row(2, 20, BOX_B), row(2, 50, BoundingBox(700, 500, 20, 20)),
        # Frame 3: gt 4 never matched (fn).
        row(3, 40, BOX_A), row(3, 20, BOX_B), row(3, 30, BOX_C),
    ]
    return gt_entries, rows


class TestEvaluateTracks:
    def test_pinned_fixture_counts(self):
        gt_entries, rows = pinned_counts_fixture()
        report = evaluate_tracks(gt_entries, rows)
        assert (report.fp, report.fn, report.idsw, report.gt_total) == (1, 2, 1, 10)
        assert report.mota == 0.6

    def test_self_evaluation_is_perfect(self):
        gt_entries = [gt(f, i, b) for f in (1, 2, 3) for i, b in ((1, BOX_A), (2, BOX_B))]
        rows = [row(g.frame_index, g.gt_id + 100, g.bbox) for g in gt_entries]
        report = evaluate_tracks(gt_entries, rows)
        assert report.mota == 1.0
        assert (report.fp, report.fn, report.idsw) == (0, 0, 0)

    def test_no_rows_scores_zero(self):
        gt_entries = [gt(1, 1, BOX_A), gt(2, 1, BOX_A)]
        report = evaluate_tracks(gt_entries, [])
        assert (report.fp, report.idsw) == (0, 0)
        assert report.fn == report.gt_total == 2
        assert report.mota == 0.0

    def test_track_id_renaming_changes_nothing(self):
        gt_entries, rows = pinned_counts_fixture()
        renamed = [row(r.frame_index, r.track_id + 100, r.bbox, r.source) for r in rows]
        base = evaluate_tracks(gt_entries, rows)
        alt = evaluate_tracks(gt_entries, renamed)
        assert (base.fp, base.fn, base.idsw, base.mota) == (alt.fp, alt.fn, alt.idsw, alt.mota)

    def test_empty_ground_truth_rejected(self):
        with pytest.raises(ValueError, match="empty ground truth"):
            evaluate_tracks([], [row(1, 1, BOX_A)])


class TestHypotheticalRows:
    def scenario(self):
        return {
            "name": "dropout",
            "frame_count": 20,
            "objects": [
                {"start_frame": 1, "end_frame": 20, "start_center": [300, 250], "velocity": [4, 0],
                 "size": [40, 30], "dropout": [[8, 11]]},
            ],
        }

    def test_placeholders_cover_the_gap_by_default(self):
        bundle = generate_sequence(self.scenario(), seed=2)
        tracks, _ = _run_tracker(bundle, TrackerConfig())
        rows = rows_from_tracks(tracks)
        with_hyp = evaluate_tracks(bundle.gt, rows)
        without = evaluate_tracks(bundle.gt, rows, include_hypothetical=False)
        assert with_hyp.mota == 1.0
        assert without.fn == 4
        assert without.mota == pytest.approx(1.0 - 4 / 20)
        assert with_hyp.gt_total == without.gt_total == 20
