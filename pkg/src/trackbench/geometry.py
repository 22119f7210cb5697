"""Axis-aligned boxes and the overlap-based detection metrics built on them."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned rectangle; x, y is the top-left corner, extents are positive."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for v in (self.x, self.y, self.w, self.h):
            if not math.isfinite(v):
                raise ValueError("box coordinates must be finite")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box extents must be positive, got w={self.w} h={self.h}")

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BoundingBox":
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    def translated(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.x + dx, self.y + dy, self.w, self.h)

    def scaled_about_center(self, factor: float) -> "BoundingBox":
        if factor <= 0 or not math.isfinite(factor):
            raise ValueError(f"scale factor must be positive and finite, got {factor}")
        return BoundingBox.from_center(self.cx, self.cy, self.w * factor, self.h * factor)

    def intersects(self, other: "BoundingBox") -> bool:
        return _intersection_area(self, other) > 0.0


def _intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    return iw * ih


def jaccard(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes, exact real arithmetic, in [0, 1]."""
    inter = _intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    union = a.area + b.area - inter
    return inter / union


class Classification(Enum):
    TP = "tp"
    FP = "fp"
    FN = "fn"
    EXCLUDED = "excluded"


def classify_frame(
    predicted: Optional[BoundingBox],
    truth: Optional[BoundingBox],
    iou_threshold: float = 0.6,
) -> Classification:
    """Per-frame verdict: TP only when overlap strictly exceeds the threshold.

    An exact-threshold overlap counts as FP; a prediction with no target is FP;
    a missing prediction with a target present is FN; both absent is EXCLUDED.
    """
    if not (0.0 < iou_threshold < 1.0):
        raise ValueError(f"iou_threshold must lie in (0, 1), got {iou_threshold}")
    if predicted is None and truth is None:
        return Classification.EXCLUDED
    if predicted is None:
        return Classification.FN
    if truth is None:
        return Classification.FP
    return Classification.TP if jaccard(predicted, truth) > iou_threshold else Classification.FP


@dataclass(frozen=True)
class MatchCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    excluded: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.excluded) < 0:
            raise ValueError("counts must be non-negative")

    def __add__(self, other: "MatchCounts") -> "MatchCounts":
        return MatchCounts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.excluded + other.excluded,
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.excluded


def accumulate(outcomes: Iterable[Classification]) -> MatchCounts:
    tp = fp = fn = ex = 0
    for o in outcomes:
        if o is Classification.TP:
            tp += 1
        elif o is Classification.FP:
            fp += 1
        elif o is Classification.FN:
            fn += 1
        else:
            ex += 1
    return MatchCounts(tp, fp, fn, ex)


def precision(counts: MatchCounts) -> float:
    d = counts.tp + counts.fp
    return counts.tp / d if d > 0 else 0.0


def recall(counts: MatchCounts) -> float:
    d = counts.tp + counts.fn
    return counts.tp / d if d > 0 else 0.0


def f_score(counts: MatchCounts) -> float:
    p = precision(counts)
    r = recall(counts)
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


# Order is shared by the JSON and CSV serializations below.
REPORT_FIELDS = ("tp", "fp", "fn", "excluded", "precision", "recall", "f_score", "iou_threshold")


@dataclass(frozen=True)
class MetricsReport:
    counts: MatchCounts
    precision: float
    recall: float
    f_score: float
    iou_threshold: float

    @classmethod
    def from_counts(cls, counts: MatchCounts, iou_threshold: float = 0.6) -> "MetricsReport":
        if not (0.0 < iou_threshold < 1.0):
            raise ValueError(f"iou_threshold must lie in (0, 1), got {iou_threshold}")
        return cls(counts, precision(counts), recall(counts), f_score(counts), iou_threshold)

    def to_dict(self) -> dict:
        return {
            "tp": self.counts.tp,
            "fp": self.counts.fp,
            "fn": self.counts.fn,
            "excluded": self.counts.excluded,
            "precision": self.precision,
            "recall": self.recall,
            "f_score": self.f_score,
            "iou_threshold": self.iou_threshold,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv_row(self) -> list[str]:
        d = self.to_dict()
        return [repr(d[k]) if isinstance(d[k], float) else str(d[k]) for k in REPORT_FIELDS]


def merge_counts(counts: Sequence[MatchCounts]) -> MatchCounts:
    out = MatchCounts()
    for c in counts:
        out = out + c
    return out


def pool(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Micro-pooled report: sum the counts, then recompute the ratios."""
    if not reports:
        raise ValueError("pool is undefined for an empty report list")
    thresholds = {r.iou_threshold for r in reports}
    if len(thresholds) != 1:
        raise ValueError(f"cannot pool reports with mixed iou thresholds: {sorted(thresholds)}")
    return MetricsReport.from_counts(
        merge_counts([r.counts for r in reports]), reports[0].iou_threshold
    )


def macro_f_score(reports: Sequence[MetricsReport]) -> float:
    """Unweighted mean of per-report F-Scores; reporting alternative to pool()."""
    if not reports:
        raise ValueError("macro_f_score is undefined for an empty report list")
    return sum(r.f_score for r in reports) / len(reports)


@dataclass
class GroundTruthTrack:
    """One entry per frame: a box when the target is visible, else None."""

    entries: list[Optional[BoundingBox]] = field(default_factory=list)

    def __post_init__(self) -> None:
        for i, e in enumerate(self.entries):
            if e is not None and not isinstance(e, BoundingBox):
                raise TypeError(f"entry {i} is neither a BoundingBox nor None")

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, index: int) -> Optional[BoundingBox]:
        return self.entries[index]

    def __iter__(self):
        return iter(self.entries)

    @property
    def present_count(self) -> int:
        return sum(1 for e in self.entries if e is not None)
