"""Track-by-detection loop: detector-initialized trackers with periodic re-detection.

One target per frame is assumed. The detector runs on the first frame and then
again once at least f_lim frames have passed since the last successful init;
anything other than exactly one detection is a detection failure and the
existing tracker keeps running. Tracker failures never trigger early detection.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Protocol

import numpy as np

from .geometry import (
    BoundingBox,
    GroundTruthTrack,
    MetricsReport,
    accumulate,
    classify_frame,
)
from .media import Frame, Sequence
from .trackers import TrackerKind, TrackerParams, TrackOutcome
from .trackers import init as tracker_init


class Source(Enum):
    DETECTOR_INIT = "detector_init"
    TRACKER = "tracker"
    NONE = "none"


class DetectOutcome(Enum):
    SINGLE = "single"
    NONE_FOUND = "none_found"
    MULTIPLE = "multiple"
    NOT_ATTEMPTED = "not_attempted"


class Detector(Protocol):
    sim_cost_ms: float

    def detect(self, frame: Frame, frame_index: int): ...


@dataclass(frozen=True)
class FrameRecord:
    frame_index: int
    source: Source
    box: Optional[BoundingBox]
    init_time_ms: Optional[float]
    update_time_ms: Optional[float]
    detect_time_ms: Optional[float]
    detect_attempted: bool
    detect_outcome: DetectOutcome

    def __post_init__(self) -> None:
        if self.source is Source.NONE and self.box is not None:
            raise ValueError("a NONE record cannot carry a box")
        if self.source is not Source.NONE and self.box is None:
            raise ValueError(f"a {self.source.value} record needs a box")
        if self.source is Source.DETECTOR_INIT and self.init_time_ms is None:
            raise ValueError("an init record needs init_time_ms")
        if self.source is Source.TRACKER and self.update_time_ms is None:
            raise ValueError("a tracker record needs update_time_ms")
        if self.detect_attempted != (self.detect_outcome is not DetectOutcome.NOT_ATTEMPTED):
            raise ValueError("detect_attempted and detect_outcome disagree")


@dataclass(frozen=True)
class RunTotals:
    total_ms: float
    init_ms: float
    update_ms: float
    failed_detect_ms: float
    detector_calls: int
    inits: int
    updates: int


@dataclass
class RunTrace:
    records: list[FrameRecord]
    totals: RunTotals
    warning: Optional[str] = None
    config_echo: dict = field(default_factory=dict)

    @property
    def frame_count(self) -> int:
        return len(self.records)


@dataclass
class RunConfig:
    f_lim: int
    tracker_kind: TrackerKind
    detector: Detector
    tracker_params: Optional[TrackerParams] = None
    iou_threshold: float = 0.6
    seed: int = 0
    clock: str = "simulated"  # or "wall"
    sim_init_ms: float = 5.0
    sim_update_ms: float = 4.0
    tracker_factory: Optional[Callable[[Frame, BoundingBox], object]] = None

    def __post_init__(self) -> None:
        if self.f_lim < 1:
            raise ValueError("f_lim must be at least 1")
        if not (0.0 < self.iou_threshold < 1.0):
            raise ValueError("iou_threshold must lie in (0, 1)")
        if self.clock not in ("simulated", "wall"):
            raise ValueError("clock must be 'simulated' or 'wall'")
        if self.sim_init_ms < 0 or self.sim_update_ms < 0:
            raise ValueError("simulated costs must be non-negative")


def run(sequence: Sequence, truth: GroundTruthTrack, config: RunConfig) -> RunTrace:
    """Drive the detector/tracker state machine over a whole sequence."""
    if len(truth) != sequence.frame_count:
        raise ValueError(
            f"truth has {len(truth)} entries for {sequence.frame_count} frames"
        )
    wall = config.clock == "wall"

    def make_tracker(frame: Frame, box: BoundingBox):
        if config.tracker_factory is not None:
            return config.tracker_factory(frame, box)
        return tracker_init(
            config.tracker_kind, frame, box, config.tracker_params, seed=config.seed
        )

    records: list[FrameRecord] = []
    tracker = None
    last_init_frame = -1
    detector_calls = 0

    for index, frame in enumerate(sequence.frames):
        frames_since_init = index - last_init_frame if tracker is not None else None
        attempt = tracker is None or frames_since_init >= config.f_lim

        detections = None
        detect_ms: Optional[float] = None
        detect_outcome = DetectOutcome.NOT_ATTEMPTED
        if attempt:
            detector_calls += 1
            t0 = time.perf_counter()
            detections = config.detector.detect(frame, index)
            detect_ms = (
                (time.perf_counter() - t0) * 1000.0 if wall else config.detector.sim_cost_ms
            )
            if len(detections) == 1:
                detect_outcome = DetectOutcome.SINGLE
            elif len(detections) == 0:
                detect_outcome = DetectOutcome.NONE_FOUND
            else:
                detect_outcome = DetectOutcome.MULTIPLE

        if detect_outcome is DetectOutcome.SINGLE:
            box = detections[0].box
            t0 = time.perf_counter()
            tracker = make_tracker(frame, box)
            init_ms = (time.perf_counter() - t0) * 1000.0 if wall else config.sim_init_ms
            last_init_frame = index
            records.append(
                FrameRecord(
                    frame_index=index,
                    source=Source.DETECTOR_INIT,
                    box=box,
                    init_time_ms=detect_ms + init_ms,
                    update_time_ms=None,
                    detect_time_ms=detect_ms,
                    detect_attempted=True,
                    detect_outcome=detect_outcome,
                )
            )
            continue

        if tracker is None:
            records.append(
                FrameRecord(
                    frame_index=index,
                    source=Source.NONE,
                    box=None,
                    init_time_ms=None,
                    update_time_ms=None,
                    detect_time_ms=detect_ms,
                    detect_attempted=attempt,
                    detect_outcome=detect_outcome,
                )
            )
            continue

        # Tracker exists; detection either failed this frame or was not due.
        t0 = time.perf_counter()
        outcome: TrackOutcome = tracker.update(frame)
        update_ms = (time.perf_counter() - t0) * 1000.0 if wall else config.sim_update_ms
        if outcome.is_lost:
            records.append(
                FrameRecord(
                    frame_index=index,
                    source=Source.NONE,
                    box=None,
                    init_time_ms=None,
                    update_time_ms=update_ms,
                    detect_time_ms=detect_ms,
                    detect_attempted=attempt,
                    detect_outcome=detect_outcome,
                )
            )
        else:
            records.append(
                FrameRecord(
                    frame_index=index,
                    source=Source.TRACKER,
                    box=outcome.box,
                    init_time_ms=None,
                    update_time_ms=update_ms,
                    detect_time_ms=detect_ms,
                    detect_attempted=attempt,
                    detect_outcome=detect_outcome,
                )
            )

    warning = None
    if all(r.source is Source.NONE for r in records):
        warning = "detection never succeeded; no tracker was ever initialized"
    return RunTrace(
        records=records,
        totals=_totals(records, detector_calls),
        warning=warning,
        config_echo={
            "f_lim": config.f_lim,
            "tracker": config.tracker_kind.value,
            "clock": config.clock,
            "iou_threshold": config.iou_threshold,
            "seed": config.seed,
        },
    )


def _totals(records: list[FrameRecord], detector_calls: int) -> RunTotals:
    init_ms = sum(r.init_time_ms for r in records if r.init_time_ms is not None)
    update_ms = sum(r.update_time_ms for r in records if r.update_time_ms is not None)
    failed = sum(
        r.detect_time_ms
        for r in records
        if r.detect_time_ms is not None and r.source is not Source.DETECTOR_INIT
    )
    return RunTotals(
        total_ms=init_ms + update_ms + failed,
        init_ms=init_ms,
        update_ms=update_ms,
        failed_detect_ms=failed,
        detector_calls=detector_calls,
        inits=sum(1 for r in records if r.source is Source.DETECTOR_INIT),
        updates=sum(1 for r in records if r.update_time_ms is not None),
    )


def evaluate(
    trace: RunTrace, truth: GroundTruthTrack, iou_threshold: float = 0.6
) -> MetricsReport:
    if len(truth) != len(trace.records):
        raise ValueError("trace and truth must cover the same frames")
    outcomes = [
        classify_frame(record.box, truth[record.frame_index], iou_threshold)
        for record in trace.records
    ]
    return MetricsReport.from_counts(accumulate(outcomes), iou_threshold)


@dataclass(frozen=True)
class DistStats:
    count: int
    min: float
    median: float
    mean: float
    p95: float
    max: float

    @classmethod
    def from_values(cls, values: list[float]) -> Optional["DistStats"]:
        if not values:
            return None
        arr = np.asarray(values, dtype=np.float64)
        return cls(
            count=int(arr.size),
            min=float(arr.min()),
            median=float(np.median(arr)),
            mean=float(arr.mean()),
            p95=float(np.percentile(arr, 95)),
            max=float(arr.max()),
        )

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "min": self.min,
            "median": self.median,
            "mean": self.mean,
            "p95": self.p95,
            "max": self.max,
        }


@dataclass(frozen=True)
class TimingSummary:
    init: Optional[DistStats]
    update: Optional[DistStats]
    average_time_ms: float
    frame_count: int
    total_ms: float

    def to_dict(self) -> dict:
        return {
            "init": self.init.to_dict() if self.init else None,
            "update": self.update.to_dict() if self.update else None,
            "average_time_ms": self.average_time_ms,
            "frame_count": self.frame_count,
            "total_ms": self.total_ms,
        }


def timing_summary(trace: RunTrace) -> TimingSummary:
    """Distributions of init and update costs plus the per-frame average.

    The average divides every recorded cost (inits, updates, and failed
    detection attempts) by the frame count; failed attempts never enter the
    init distribution.
    """
    if not trace.records:
        raise ValueError("cannot summarize an empty trace")
    init_times = [r.init_time_ms for r in trace.records if r.init_time_ms is not None]
    update_times = [r.update_time_ms for r in trace.records if r.update_time_ms is not None]
    failed = [
        r.detect_time_ms
        for r in trace.records
        if r.detect_time_ms is not None and r.source is not Source.DETECTOR_INIT
    ]
    total = sum(init_times) + sum(update_times) + sum(failed)
    return TimingSummary(
        init=DistStats.from_values(init_times),
        update=DistStats.from_values(update_times),
        average_time_ms=total / len(trace.records),
        frame_count=len(trace.records),
        total_ms=total,
    )


# ---------------------------------------------------------------------------
# Trace serialization


def _box_to_list(box: Optional[BoundingBox]) -> Optional[list[float]]:
    return None if box is None else [box.x, box.y, box.w, box.h]


def save_trace_jsonl(trace: RunTrace, path: str | Path) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        for r in trace.records:
            fh.write(
                json.dumps(
                    {
                        "frame_index": r.frame_index,
                        "source": r.source.value,
                        "box": _box_to_list(r.box),
                        "init_time_ms": r.init_time_ms,
                        "update_time_ms": r.update_time_ms,
                        "detect_time_ms": r.detect_time_ms,
                        "detect_attempted": r.detect_attempted,
                        "detect_outcome": r.detect_outcome.value,
                    }
                )
                + "\n"
            )


def _format_float(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def save_predictions_csv(trace: RunTrace, path: str | Path) -> None:
    """frame,x,y,width,height,source with -1 sentinels on NONE frames."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("frame,x,y,width,height,source\n")
        for r in trace.records:
            if r.box is None:
                fh.write(f"{r.frame_index},-1,-1,-1,-1,{r.source.value}\n")
            else:
                b = r.box
                fh.write(
                    f"{r.frame_index},{_format_float(b.x)},{_format_float(b.y)},"
                    f"{_format_float(b.w)},{_format_float(b.h)},{r.source.value}\n"
                )


def load_predictions_csv(path: str | Path) -> list[Optional[BoundingBox]]:
    """Read a predictions CSV back into per-frame optional boxes."""
    import csv as _csv

    boxes: list[Optional[BoundingBox]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(_csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and row[0].strip().lower() == "frame":
                continue
            if len(row) != 6:
                raise ValueError(f"line {lineno}: expected 6 columns, got {len(row)}")
            try:
                idx = int(row[0])
                x, y, w, h = (float(c) for c in row[1:5])
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from exc
            if idx != len(boxes):
                raise ValueError(f"line {lineno}: expected frame {len(boxes)}, got {idx}")
            if w == -1.0 and h == -1.0:
                boxes.append(None)
            else:
                boxes.append(BoundingBox(x, y, w, h))
    return boxes
