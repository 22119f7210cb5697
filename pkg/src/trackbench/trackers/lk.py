"""Pyramidal iterative Lucas-Kanade sparse point tracking.

All points are stepped together: each refinement iteration is a handful of
vectorized gathers over an (n_points, window^2) sample block, which keeps the
per-frame cost low enough for the median-flow tracker's 10x10 grids.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..media import Frame, bilinear_sample
from .base import MedianFlowParams

_BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
_MIN_EIG_NORMALIZED = 1e-4
_CONVERGENCE_PX = 0.01


def build_pyramid(image: np.ndarray, levels: int) -> list[np.ndarray]:
    """Decimate by 2 after 5-tap binomial smoothing; stops early on tiny levels."""
    pyramid = [np.asarray(image, dtype=np.float64)]
    for _ in range(levels - 1):
        prev = pyramid[-1]
        if min(prev.shape) < 8:
            break
        smooth = ndimage.correlate1d(prev, _BINOMIAL5, axis=0, mode="nearest")
        smooth = ndimage.correlate1d(smooth, _BINOMIAL5, axis=1, mode="nearest")
        pyramid.append(smooth[::2, ::2])
    return pyramid


def gradients(pyramid: list[np.ndarray]) -> list[tuple[np.ndarray, np.ndarray]]:
    return [(np.gradient(lvl, axis=1), np.gradient(lvl, axis=0)) for lvl in pyramid]


def _window_offsets(window: int) -> np.ndarray:
    half = window // 2
    r = np.arange(-half, half + 1, dtype=np.float64)
    ox, oy = np.meshgrid(r, r)
    return np.stack([ox.ravel(), oy.ravel()], axis=1)  # (window^2, 2)


def _in_bounds(samples: np.ndarray, width: int, height: int) -> np.ndarray:
    """True per point when every window sample stays inside the image."""
    x = samples[..., 0]
    y = samples[..., 1]
    eps = 1e-9
    return (
        (x.min(axis=1) >= -eps)
        & (x.max(axis=1) <= width - 1 + eps)
        & (y.min(axis=1) >= -eps)
        & (y.max(axis=1) <= height - 1 + eps)
    )


def track_pyramids(
    prev_pyr: list[np.ndarray],
    next_pyr: list[np.ndarray],
    prev_grads: list[tuple[np.ndarray, np.ndarray]],
    points: np.ndarray,
    window: int,
    max_iterations: int,
) -> tuple[np.ndarray, np.ndarray]:
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = points.shape[0]
    status = np.ones(n, dtype=bool)
    v = np.zeros((n, 2))
    offsets = _window_offsets(window)
    k2 = offsets.shape[0]

    first_level = True
    for level in reversed(range(len(prev_pyr))):
        if not first_level:
            v = v * 2.0
        first_level = False

        image_i = prev_pyr[level]
        image_j = next_pyr[level]
        grad_x, grad_y = prev_grads[level]
        h, w = image_i.shape
        pl = points / float(2**level)
        base = pl[:, None, :] + offsets[None, :, :]  # (n, k2, 2)

        # Both verdicts (bounds, texture) belong to the finest level; a coarse
        # level that cannot refine a point just passes its guess through.
        inside = _in_bounds(base, w, h)
        if level == 0:
            status &= inside
        sample_i = bilinear_sample(image_i, base[..., 0], base[..., 1])
        gx = bilinear_sample(grad_x, base[..., 0], base[..., 1])
        gy = bilinear_sample(grad_y, base[..., 0], base[..., 1])

        g11 = np.sum(gx * gx, axis=1)
        g12 = np.sum(gx * gy, axis=1)
        g22 = np.sum(gy * gy, axis=1)
        trace = g11 + g22
        det = g11 * g22 - g12 * g12
        eig_min = (trace - np.sqrt(np.maximum(trace * trace - 4.0 * det, 0.0))) / 2.0
        solvable = (eig_min / k2) >= _MIN_EIG_NORMALIZED
        if level == 0:
            status &= solvable
        safe_det = np.where(det > 0, det, 1.0)

        active = np.flatnonzero(status & solvable & inside)
        for _ in range(max_iterations):
            if active.size == 0:
                break
            q = base[active] + v[active][:, None, :]
            ok = _in_bounds(q, w, h)
            left = active[~ok]
            if left.size:
                if level == 0:
                    status[left] = False  # the shifted window left the image
                active = active[ok]
                q = q[ok]
                if active.size == 0:
                    break
            sample_j = bilinear_sample(image_j, q[..., 0], q[..., 1])
            diff = sample_i[active] - sample_j
            b1 = np.sum(diff * gx[active], axis=1)
            b2 = np.sum(diff * gy[active], axis=1)
            d = safe_det[active]
            step_x = (g22[active] * b1 - g12[active] * b2) / d
            step_y = (g11[active] * b2 - g12[active] * b1) / d
            v[active, 0] += step_x
            v[active, 1] += step_y
            moved = np.hypot(step_x, step_y)
            active = active[moved >= _CONVERGENCE_PX]

    return points + v, status


def lk_track_points(
    prev: Frame,
    nxt: Frame,
    points: np.ndarray,
    params: MedianFlowParams | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Track (x, y) points from prev to nxt.

    Returns (tracked_points, status); a point's status goes false when its
    window leaves the image at any pyramid level or its gradient matrix at the
    finest level is near-singular (normalized smaller eigenvalue below 1e-4).
    """
    params = params or MedianFlowParams()
    if prev.pixels.shape != nxt.pixels.shape:
        raise ValueError("frames must share dimensions")
    prev_pyr = build_pyramid(prev.pixels / 255.0, params.pyramid_levels)
    next_pyr = build_pyramid(nxt.pixels / 255.0, params.pyramid_levels)
    grads = gradients(prev_pyr)
    return track_pyramids(
        prev_pyr, next_pyr, grads, points, params.lk_window, params.lk_iterations
    )
