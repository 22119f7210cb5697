"""Correlation filter tracker trained by minimizing output sum of squared error.

The filter is learned in the Fourier domain against a narrow Gaussian response
and refreshed with a running average; a peak-to-sidelobe ratio gate declares
tracking failure before the model can be polluted.
"""
from __future__ import annotations

import numpy as np

from ..geometry import BoundingBox
from ..media import Frame, Patch, bilinear_sample, extract_patch
from .base import MosseParams, TrackerKind, TrackOutcome
from .common import (
    check_box_in_frame,
    check_same_dims,
    clamp_center_to_frame,
    gaussian_peak,
    hann2d,
    subseed,
)

_PSR_EXCLUSION = 11  # sidelobe statistics ignore this square around the peak
_MAX_WARP_ROTATION = np.deg2rad(10.0)
_WARP_SCALE_SPAN = 0.05


def preprocess_patch(patch: Patch, reg_eps: float = 1e-5) -> Patch:
    """Log-compress, zero-mean, norm-scale, then taper with a Hann window."""
    v = np.log1p(patch.values)
    v = v - v.mean()
    norm = float(np.linalg.norm(v))
    v = v / (norm + reg_eps)
    return Patch(v * hann2d(v.shape))


def filter_response(
    numerator: np.ndarray, denominator: np.ndarray, values: np.ndarray, reg_eps: float
) -> np.ndarray:
    """Correlation response: inverse transform of conj(H) x F with H = A / (B + eps)."""
    spectrum = np.fft.fft2(values)
    h_conj = numerator / (denominator + reg_eps)
    return np.real(np.fft.ifft2(h_conj * spectrum))


def peak_to_sidelobe(response: np.ndarray, reg_eps: float = 1e-5) -> float:
    flat_peak = int(np.argmax(response))
    py, px = np.unravel_index(flat_peak, response.shape)
    half = _PSR_EXCLUSION // 2
    mask = np.ones(response.shape, dtype=bool)
    mask[
        max(py - half, 0) : py + half + 1,
        max(px - half, 0) : px + half + 1,
    ] = False
    sidelobe = response[mask]
    if sidelobe.size == 0:
        return float("inf")
    peak = float(response[py, px])
    return (peak - float(sidelobe.mean())) / (float(sidelobe.std()) + reg_eps)


def _affine_warp(values: np.ndarray, angle: float, scale: float) -> np.ndarray:
    h, w = values.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.indices((h, w), dtype=np.float64)
    dx = xx - cx
    dy = yy - cy
    cos_a, sin_a = np.cos(angle), np.sin(angle)
    sx = (cos_a * dx + sin_a * dy) / scale + cx
    sy = (-sin_a * dx + cos_a * dy) / scale + cy
    return bilinear_sample(values, sx, sy)


class MosseState:
    kind = TrackerKind.MOSSE

    def __init__(self, frame: Frame, box: BoundingBox, params: MosseParams, seed: int = 0):
        check_box_in_frame(box, frame)
        self.params = params
        self.frame_width = frame.width
        self.frame_height = frame.height
        self.current_box = box
        win = params.window
        self.g_hat = np.fft.fft2(gaussian_peak(win, win, params.sigma_target))

        raw = extract_patch(frame, box, win, win).values
        rng = subseed(seed, 11)
        samples = [raw]
        for _ in range(params.init_perturbations):
            angle = rng.uniform(-_MAX_WARP_ROTATION, _MAX_WARP_ROTATION)
            scale = rng.uniform(1.0 - _WARP_SCALE_SPAN, 1.0 + _WARP_SCALE_SPAN)
            samples.append(_affine_warp(raw, angle, scale))

        numerator = np.zeros((win, win), dtype=np.complex128)
        denominator = np.zeros((win, win), dtype=np.float64)
        for sample in samples:
            spectrum = np.fft.fft2(preprocess_patch(Patch(sample), params.reg_eps).values)
            numerator += self.g_hat * np.conj(spectrum)
            denominator += np.real(spectrum * np.conj(spectrum))
        self.numerator = numerator
        self.denominator = denominator

    def update(self, frame: Frame) -> TrackOutcome:
        check_same_dims(frame, self.frame_width, self.frame_height)
        p = self.params
        win = p.window
        box = self.current_box
        patch = preprocess_patch(extract_patch(frame, box, win, win), p.reg_eps)
        _, (dx, dy), psr = correlate(self, patch)
        if psr < p.psr_threshold:
            return TrackOutcome.lost()

        moved = box.translated(dx * box.w / win, dy * box.h / win)
        moved = clamp_center_to_frame(moved, self.frame_width, self.frame_height)
        refreshed = preprocess_patch(extract_patch(frame, moved, win, win), p.reg_eps)
        spectrum = np.fft.fft2(refreshed.values)
        lr = p.learning_rate
        self.numerator = lr * (self.g_hat * np.conj(spectrum)) + (1.0 - lr) * self.numerator
        self.denominator = (
            lr * np.real(spectrum * np.conj(spectrum)) + (1.0 - lr) * self.denominator
        )
        self.current_box = moved
        return TrackOutcome.estimate(moved)


def correlate(state: MosseState, patch: Patch) -> tuple[Patch, tuple[int, int], float]:
    """Response map, peak displacement relative to the window center, and PSR."""
    if patch.values.shape != state.numerator.shape:
        raise ValueError("patch does not match the filter window")
    response = filter_response(
        state.numerator, state.denominator, patch.values, state.params.reg_eps
    )
    py, px = np.unravel_index(int(np.argmax(response)), response.shape)
    dy = int(py) - response.shape[0] // 2
    dx = int(px) - response.shape[1] // 2
    psr = peak_to_sidelobe(response, state.params.reg_eps)
    return Patch(response), (dx, dy), psr
