"""Single-target tracker benchmark: trackers, detectors, metrics, and a run loop."""

from .geometry import (
    BoundingBox,
    Classification,
    MatchCounts,
    MetricsReport,
    classify_frame,
    jaccard,
    macro_f_score,
    pool,
)
from .media import Frame, GroundTruthTrack, Sequence, SynthConfig, generate_synthetic
from .orchestrator import RunConfig, RunTrace, evaluate, run, timing_summary
from .trackers import TrackerKind, default_params, init, update

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "Classification",
    "Frame",
    "GroundTruthTrack",
    "MatchCounts",
    "MetricsReport",
    "RunConfig",
    "RunTrace",
    "Sequence",
    "SynthConfig",
    "TrackerKind",
    "classify_frame",
    "default_params",
    "evaluate",
    "generate_synthetic",
    "init",
    "jaccard",
    "macro_f_score",
    "pool",
    "run",
    "timing_summary",
    "update",
    "__version__",
]
