"""Three from-scratch single-target trackers behind one init/update interface."""
from __future__ import annotations

from typing import Optional, Union

from ..geometry import BoundingBox
from ..media import Frame
from .base import KcfParams, MedianFlowParams, MosseParams, TrackerKind, TrackOutcome
from .kcf import KcfState, gaussian_kernel_correlation
from .lk import build_pyramid, lk_track_points
from .medianflow import MedianFlowState, medianflow_step
from .mosse import MosseState, correlate, filter_response, peak_to_sidelobe, preprocess_patch

TrackerParams = Union[MosseParams, KcfParams, MedianFlowParams]
TrackerState = Union[MosseState, KcfState, MedianFlowState]

_STATE_CLASSES = {
    TrackerKind.MOSSE: (MosseState, MosseParams),
    TrackerKind.KCF: (KcfState, KcfParams),
    TrackerKind.MEDIANFLOW: (MedianFlowState, MedianFlowParams),
}


def default_params(kind: TrackerKind) -> TrackerParams:
    return _STATE_CLASSES[kind][1]()


def init(
    kind: TrackerKind,
    frame: Frame,
    box: BoundingBox,
    params: Optional[TrackerParams] = None,
    seed: int = 0,
) -> TrackerState:
    state_cls, params_cls = _STATE_CLASSES[kind]
    if params is None:
        params = params_cls()
    elif not isinstance(params, params_cls):
        raise TypeError(f"{kind.value} tracker expects {params_cls.__name__}")
    return state_cls(frame, box, params, seed)


def update(state: TrackerState, frame: Frame) -> tuple[TrackerState, TrackOutcome]:
    return state, state.update(frame)


__all__ = [
    "TrackerKind",
    "TrackOutcome",
    "TrackerParams",
    "TrackerState",
    "MosseParams",
    "KcfParams",
    "MedianFlowParams",
    "MosseState",
    "KcfState",
    "MedianFlowState",
    "default_params",
    "init",
    "update",
    "preprocess_patch",
    "correlate",
    "filter_response",
    "peak_to_sidelobe",
    "gaussian_kernel_correlation",
    "lk_track_points",
    "build_pyramid",
    "medianflow_step",
]
