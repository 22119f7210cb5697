import json

import numpy as np
import pytest

from trackbench.detector import Detection, OracleConfig, OracleDetector
from trackbench.geometry import BoundingBox, GroundTruthTrack
from trackbench.media import Frame, Sequence
from trackbench.orchestrator import (
    DetectOutcome,
    DistStats,
    FrameRecord,
    RunConfig,
    RunTrace,
    RunTotals,
    Source,
    evaluate,
    load_predictions_csv,
    run,
    save_predictions_csv,
    save_trace_jsonl,
    timing_summary,
)
from trackbench.trackers import TrackerKind, TrackOutcome


BOX = BoundingBox(20, 20, 16, 16)


def make_sequence(n: int) -> Sequence:
    frames = [Frame(i, np.full((64, 96), 100, dtype=np.uint8)) for i in range(n)]
    return Sequence("synthetic", frames)


def make_truth(n: int) -> GroundTruthTrack:
    return GroundTruthTrack([BOX] * n)


class ScriptedDetector:
    """Returns a canned detection list per frame index."""

    def __init__(self, script: dict, default=None, cost: float = 60.0):
        self.script = script
        self.default = default if default is not None else [Detection(BOX, 1.0)]
        self.sim_cost_ms = cost
        self.calls: list[int] = []

    def detect(self, frame, frame_index):
        self.calls.append(frame_index)
        return self.script.get(frame_index, self.default)


class ScriptedTracker:
    """Emits canned outcomes; remembers how often it was stepped."""

    def __init__(self, outcomes=None):
        self.outcomes = list(outcomes) if outcomes else []
        self.steps = 0

    def update(self, frame):
        self.steps += 1
        if self.outcomes:
            return self.outcomes.pop(0)
        return TrackOutcome.estimate(BOX)


def scripted_config(detector, f_lim=10, **kwargs):
    outcomes = kwargs.pop("outcomes", None)
    holder = {}

    def factory(frame, box):
        holder["tracker"] = ScriptedTracker(outcomes)
        return holder["tracker"]

    config = RunConfig(
        f_lim=f_lim,
        tracker_kind=TrackerKind.MOSSE,
        detector=detector,
        tracker_factory=factory,
        **kwargs,
    )
    return config, holder


class TestSchedule:
    def test_inits_on_schedule(self):
        detector = ScriptedDetector({})
        config, _ = scripted_config(detector, f_lim=10)
        trace = run(make_sequence(30), make_truth(30), config)
        init_frames = [r.frame_index for r in trace.records if r.source is Source.DETECTOR_INIT]
        assert init_frames == [0, 10, 20]
        assert detector.calls == [0, 10, 20]
        assert trace.totals.detector_calls == 3

    @pytest.mark.parametrize("f_lim", [1, 3, 7, 10, 29, 30, 100])
    def test_detector_call_count_formula(self, f_lim):
        n = 30
        detector = ScriptedDetector({})
        config, _ = scripted_config(detector, f_lim=f_lim)
        trace = run(make_sequence(n), make_truth(n), config)
        assert trace.totals.detector_calls == 1 + (n - 1) // f_lim

    def test_failed_first_detection_retries_every_frame(self):
        detector = ScriptedDetector({0: [], 1: [], 2: []})
        config, _ = scripted_config(detector, f_lim=10)
        trace = run(make_sequence(8), make_truth(8), config)
        assert detector.calls[:4] == [0, 1, 2, 3]
        assert trace.records[0].source is Source.NONE
        assert trace.records[2].source is Source.NONE
        assert trace.records[3].source is Source.DETECTOR_INIT
        # counter starts at the successful init, not at the first attempt
        assert [c for c in detector.calls if c > 3] == []

    def test_multiple_boxes_is_failure_keeps_tracker(self):
        two = [Detection(BOX, 1.0), Detection(BoundingBox(50, 20, 16, 16), 0.9)]
        detector = ScriptedDetector({10: two, 11: two})
        config, holder = scripted_config(detector, f_lim=10)
        trace = run(make_sequence(14), make_truth(14), config)
        # tracker from frame 0 still runs on the failed-detection frames
        assert trace.records[10].source is Source.TRACKER
        assert trace.records[10].detect_attempted
        assert trace.records[10].detect_outcome is DetectOutcome.MULTIPLE
        # retry every subsequent frame until success at 12
        assert detector.calls == [0, 10, 11, 12]
        assert trace.records[12].source is Source.DETECTOR_INIT
        # schedule restarts from the new init
        assert holder["tracker"].steps > 0

    def test_lost_never_triggers_early_detection(self):
        detector = ScriptedDetector({})
        outcomes = [TrackOutcome.lost()] * 9
        config, _ = scripted_config(detector, f_lim=10, outcomes=outcomes)
        trace = run(make_sequence(12), make_truth(12), config)
        assert detector.calls == [0, 10]
        lost_records = trace.records[1:10]
        assert all(r.source is Source.NONE for r in lost_records)
        assert all(r.update_time_ms is not None for r in lost_records)
        assert all(not r.detect_attempted for r in lost_records)

    def test_lost_streak_records_update_cost(self):
        detector = ScriptedDetector({})
        config, _ = scripted_config(
            detector, f_lim=10, outcomes=[TrackOutcome.lost()] * 3
        )
        trace = run(make_sequence(5), make_truth(5), config)
        assert trace.records[1].update_time_ms == config.sim_update_ms
        assert trace.records[1].box is None

    def test_detection_never_succeeds_warns(self):
        detector = ScriptedDetector({}, default=[])
        config, _ = scripted_config(detector, f_lim=10)
        trace = run(make_sequence(5), make_truth(5), config)
        assert trace.warning is not None
        assert all(r.source is Source.NONE for r in trace.records)
        assert trace.totals.detector_calls == 5

    def test_truth_length_mismatch(self):
        detector = ScriptedDetector({})
        config, _ = scripted_config(detector)
        with pytest.raises(ValueError):
            run(make_sequence(5), make_truth(4), config)

    def test_deterministic_with_real_tracker(self, calm_sequence):
        seq, truth = calm_sequence
        def trace_once():
            det = OracleDetector(OracleConfig(jitter_sigma=1.0, seed=3), truth)
            config = RunConfig(
                f_lim=10, tracker_kind=TrackerKind.MOSSE, detector=det, seed=5
            )
            return run(seq, truth, config)
        a, b = trace_once(), trace_once()
        assert a.records == b.records
        assert a.totals == b.totals


class TestEvaluate:
    def test_perfect_trace(self):
        detector = ScriptedDetector({})
        config, _ = scripted_config(detector, f_lim=10)
        truth = make_truth(20)
        trace = run(make_sequence(20), truth, config)
        report = evaluate(trace, truth)
        assert report.f_score == 1.0
        assert report.counts.tp == 20

    def test_all_none_with_truth_present(self):
        detector = ScriptedDetector({}, default=[])
        config, _ = scripted_config(detector)
        truth = make_truth(6)
        trace = run(make_sequence(6), truth, config)
        report = evaluate(trace, truth)
        assert report.counts.fn == 6
        assert report.f_score == 0.0

    def test_absent_truth_frames_are_excluded(self):
        detector = ScriptedDetector({}, default=[])
        config, _ = scripted_config(detector)
        truth = GroundTruthTrack([None] * 4)
        trace = run(make_sequence(4), truth, config)
        report = evaluate(trace, truth)
        assert report.counts.excluded == 4
        assert report.counts.total == 4

    def test_mixed_counts(self):
        # 8 aligned frames, 2 badly displaced: F = 2*8/(2*8 + 2 + 2)
        good = TrackOutcome.estimate(BOX)
        bad = TrackOutcome.estimate(BoundingBox(50, 50, 16, 16))
        outcomes = [good] * 7 + [bad] * 2
        detector = ScriptedDetector({})
        config, _ = scripted_config(detector, f_lim=100, outcomes=outcomes)
        truth = make_truth(10)
        trace = run(make_sequence(10), truth, config)
        report = evaluate(trace, truth)
        assert (report.counts.tp, report.counts.fp, report.counts.fn) == (8, 2, 0)
        assert report.f_score == pytest.approx(16 / 18)

    def test_mismatched_lengths(self):
        detector = ScriptedDetector({})
        config, _ = scripted_config(detector)
        trace = run(make_sequence(5), make_truth(5), config)
        with pytest.raises(ValueError):
            evaluate(trace, make_truth(6))


class TestTiming:
    def test_hand_built_average(self):
        # one init billed 60 ms + 9 updates at 4 ms over 10 frames: 9.6 exact
        records = [
            FrameRecord(0, Source.DETECTOR_INIT, BOX, 60.0, None, 55.0, True, DetectOutcome.SINGLE)
        ]
        for i in range(1, 10):
            records.append(
                FrameRecord(i, Source.TRACKER, BOX, None, 4.0, None, False, DetectOutcome.NOT_ATTEMPTED)
            )
        trace = RunTrace(records=records, totals=RunTotals(96.0, 60.0, 36.0, 0.0, 1, 1, 9))
        summary = timing_summary(trace)
        assert summary.average_time_ms == 9.6
        assert summary.init.count == 1
        assert summary.update.count == 9
        assert summary.total_ms == 96.0

    def test_failed_detect_counts_in_average_not_in_init_dist(self):
        detector = ScriptedDetector({10: [], 11: []}, cost=60.0)
        config, _ = scripted_config(detector, f_lim=10, sim_init_ms=5.0, sim_update_ms=4.0)
        n = 14
        trace = run(make_sequence(n), make_truth(n), config)
        summary = timing_summary(trace)
        # inits at 0 and 12; failed detects at 10, 11 ride along with updates
        assert summary.init.count == 2
        assert summary.init.max == 65.0
        expected_total = 2 * 65.0 + 12 * 4.0 + 2 * 60.0
        assert summary.total_ms == pytest.approx(expected_total)
        assert summary.average_time_ms == pytest.approx(expected_total / n)
        assert trace.totals.failed_detect_ms == pytest.approx(120.0)

    def test_simulated_clock_is_exact(self):
        detector = ScriptedDetector({}, cost=60.0)
        config, _ = scripted_config(detector, f_lim=10, sim_init_ms=5.0, sim_update_ms=4.0)
        trace = run(make_sequence(30), make_truth(30), config)
        summary = timing_summary(trace)
        assert summary.average_time_ms == pytest.approx((3 * 65.0 + 27 * 4.0) / 30)

    def test_wall_clock_is_positive(self):
        detector = ScriptedDetector({})
        config, _ = scripted_config(detector, f_lim=10, clock="wall")
        trace = run(make_sequence(5), make_truth(5), config)
        summary = timing_summary(trace)
        assert summary.average_time_ms > 0.0

    def test_dist_stats(self):
        stats = DistStats.from_values([1.0, 2.0, 3.0, 4.0])
        assert stats.min == 1.0
        assert stats.median == 2.5
        assert stats.max == 4.0
        assert DistStats.from_values([]) is None

    def test_empty_trace_rejected(self):
        trace = RunTrace(records=[], totals=RunTotals(0, 0, 0, 0, 0, 0, 0))
        with pytest.raises(ValueError):
            timing_summary(trace)


class TestRecordValidation:
    def test_none_source_cannot_carry_box(self):
        with pytest.raises(ValueError):
            FrameRecord(0, Source.NONE, BOX, None, None, None, False, DetectOutcome.NOT_ATTEMPTED)

    def test_init_needs_time(self):
        with pytest.raises(ValueError):
            FrameRecord(0, Source.DETECTOR_INIT, BOX, None, None, 5.0, True, DetectOutcome.SINGLE)

    def test_outcome_agreement(self):
        with pytest.raises(ValueError):
            FrameRecord(0, Source.NONE, None, None, None, None, True, DetectOutcome.NOT_ATTEMPTED)


class TestSerialization:
    def _trace(self, n=6):
        detector = ScriptedDetector({3: []})
        config, _ = scripted_config(detector, f_lim=3)
        return run(make_sequence(n), make_truth(n), config)

    def test_predictions_round_trip(self, tmp_path):
        trace = self._trace()
        path = tmp_path / "pred.csv"
        save_predictions_csv(trace, path)
        boxes = load_predictions_csv(path)
        assert len(boxes) == len(trace.records)
        for box, record in zip(boxes, trace.records):
            assert box == record.box

    def test_predictions_header_and_sentinels(self, tmp_path):
        detector = ScriptedDetector({}, default=[])
        config, _ = scripted_config(detector)
        trace = run(make_sequence(2), make_truth(2), config)
        path = tmp_path / "pred.csv"
        save_predictions_csv(trace, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "frame,x,y,width,height,source"
        assert lines[1] == "0,-1,-1,-1,-1,none"

    def test_load_rejects_bad_column_count(self, tmp_path):
        path = tmp_path / "pred.csv"
        path.write_text("frame,x,y,width,height,source\n0,1,2,3,4\n")
        with pytest.raises(ValueError, match="line 2"):
            load_predictions_csv(path)

    def test_load_rejects_out_of_order(self, tmp_path):
        path = tmp_path / "pred.csv"
        path.write_text("frame,x,y,width,height,source\n1,1,2,3,4,tracker\n")
        with pytest.raises(ValueError, match="line 2"):
            load_predictions_csv(path)

    def test_trace_jsonl_fields(self, tmp_path):
        trace = self._trace()
        path = tmp_path / "trace.jsonl"
        save_trace_jsonl(trace, path)
        lines = path.read_text().splitlines()
        assert len(lines) == len(trace.records)
        first = json.loads(lines[0])
        assert first["source"] == "detector_init"
        assert first["detect_outcome"] == "single"
        assert first["box"] == [BOX.x, BOX.y, BOX.w, BOX.h]
        failed = json.loads(lines[3])
        assert failed["detect_attempted"] is True
        assert failed["detect_outcome"] == "none_found"


class TestConfigValidation:
    def test_f_lim_domain(self):
        detector = ScriptedDetector({})
        with pytest.raises(ValueError):
            RunConfig(f_lim=0, tracker_kind=TrackerKind.MOSSE, detector=detector)

    def test_clock_domain(self):
        detector = ScriptedDetector({})
        with pytest.raises(ValueError):
            RunConfig(f_lim=1, tracker_kind=TrackerKind.MOSSE, detector=detector, clock="cpu")
