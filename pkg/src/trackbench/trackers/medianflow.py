"""Median-flow tracker: forward-backward Lucas-Kanade consensus over a point grid.

Points that survive the forward-backward and appearance gates vote with their
median displacement; pairwise distance ratios give the scale change. The
tracker declares failure instead of guessing when the consensus degrades.
"""
from __future__ import annotations

import numpy as np

from ..geometry import BoundingBox
from ..media import Frame, bilinear_sample
from .base import MedianFlowParams, TrackerKind, TrackOutcome
from .common import check_box_in_frame, check_same_dims
from .lk import build_pyramid, gradients, track_pyramids

_MIN_SURVIVORS = 4


class MedianFlowState:
    kind = TrackerKind.MEDIANFLOW

    def __init__(self, frame: Frame, box: BoundingBox, params: MedianFlowParams, seed: int = 0):
        check_box_in_frame(box, frame)
        self.params = params
        self.frame_width = frame.width
        self.frame_height = frame.height
        self.current_box = box
        self.prev_frame = frame

    def update(self, frame: Frame) -> TrackOutcome:
        check_same_dims(frame, self.frame_width, self.frame_height)
        outcome = medianflow_step(self, frame)
        if not outcome.is_lost:
            self.prev_frame = frame
            self.current_box = outcome.box
        return outcome


def _grid_points(box: BoundingBox, grid: int) -> np.ndarray:
    xs = box.x + (np.arange(grid) + 0.5) * (box.w / grid)
    ys = box.y + (np.arange(grid) + 0.5) * (box.h / grid)
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def _patch_rows(image: np.ndarray, points: np.ndarray, patch: int) -> np.ndarray:
    offsets = np.arange(patch, dtype=np.float64) - (patch - 1) / 2.0
    ox, oy = np.meshgrid(offsets, offsets)
    grid = np.stack([ox.ravel(), oy.ravel()], axis=1)
    samples = points[:, None, :] + grid[None, :, :]
    return bilinear_sample(image, samples[..., 0], samples[..., 1])


def _point_ncc(
    prev: np.ndarray, nxt: np.ndarray, a: np.ndarray, b: np.ndarray, patch: int
) -> np.ndarray:
    pa = _patch_rows(prev, a, patch)
    pb = _patch_rows(nxt, b, patch)
    pa = pa - pa.mean(axis=1, keepdims=True)
    pb = pb - pb.mean(axis=1, keepdims=True)
    denom = np.sqrt(np.sum(pa * pa, axis=1) * np.sum(pb * pb, axis=1))
    num = np.sum(pa * pb, axis=1)
    out = np.zeros(len(a))
    ok = denom > 1e-12
    out[ok] = num[ok] / denom[ok]
    return out


def _pairwise_scale(before: np.ndarray, after: np.ndarray) -> float:
    n = len(before)
    if n < 2:
        return 1.0
    ia, ib = np.triu_indices(n, k=1)
    d0 = np.hypot(*(before[ia] - before[ib]).T)
    d1 = np.hypot(*(after[ia] - after[ib]).T)
    usable = d0 > 1e-9
    if not np.any(usable):
        return 1.0
    return float(np.median(d1[usable] / d0[usable]))


def medianflow_step(state: MedianFlowState, frame: Frame) -> TrackOutcome:
    """One forward-backward consensus step; never mutates the state."""
    p = state.params
    box = state.current_box
    points = _grid_points(box, p.grid)

    prev01 = state.prev_frame.pixels / 255.0
    next01 = frame.pixels / 255.0
    prev_pyr = build_pyramid(prev01, p.pyramid_levels)
    next_pyr = build_pyramid(next01, p.pyramid_levels)
    prev_grads = gradients(prev_pyr)
    next_grads = gradients(next_pyr)

    forward, st_f = track_pyramids(
        prev_pyr, next_pyr, prev_grads, points, p.lk_window, p.lk_iterations
    )
    backward, st_b = track_pyramids(
        next_pyr, prev_pyr, next_grads, forward, p.lk_window, p.lk_iterations
    )
    valid = st_f & st_b
    if not np.any(valid):
        return TrackOutcome.lost()

    fb_error = np.hypot(*(backward - points).T)
    median_fb = float(np.median(fb_error[valid]))
    if median_fb > p.fb_error_max:
        return TrackOutcome.lost()
    keep = valid & (fb_error <= median_fb)

    ncc = _point_ncc(prev01, next01, points, forward, p.ncc_patch)
    kept_ncc = ncc[keep]
    if kept_ncc.size == 0:
        return TrackOutcome.lost()
    keep &= ncc >= float(np.median(kept_ncc))
    if int(keep.sum()) < _MIN_SURVIVORS:
        return TrackOutcome.lost()

    moves = forward[keep] - points[keep]
    dx = float(np.median(moves[:, 0]))
    dy = float(np.median(moves[:, 1]))
    scale = _pairwise_scale(points[keep], forward[keep])
    if scale <= 0:
        return TrackOutcome.lost()

    new_box = box.translated(dx, dy).scaled_about_center(scale)
    frame_rect = BoundingBox(0.0, 0.0, float(state.frame_width), float(state.frame_height))
    if not new_box.intersects(frame_rect):
        return TrackOutcome.lost()
    return TrackOutcome.estimate(new_box)
