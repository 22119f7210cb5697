"""Kernelized correlation filter tracker on raw grayscale features.

Ridge regression over all circular shifts of a padded search window, solved in
the Fourier domain with a Gaussian kernel. The failure gate is a collapse of
the response peak against the running median of previous successful peaks.
"""
from __future__ import annotations

import math
import statistics

import numpy as np

from ..geometry import BoundingBox
from ..media import Frame, Patch, extract_patch
from .base import KcfParams, TrackerKind, TrackOutcome
from .common import check_box_in_frame, check_same_dims, clamp_center_to_frame, gaussian_peak, hann2d

_PEAK_COLLAPSE_FACTOR = 0.2
_MIN_PEAK_HISTORY = 3
_WINDOW_MIN = 32
_WINDOW_MAX = 256


def _nearest_pow2(value: float) -> int:
    exponent = int(round(math.log2(max(value, 1.0))))
    return int(min(max(2**exponent, _WINDOW_MIN), _WINDOW_MAX))


def gaussian_kernel_correlation(x: Patch, z: Patch, sigma: float) -> Patch:
    """Gaussian kernel evaluated against every circular shift of z relative to x.

    Index (dy, dx) holds k(shift by (dx, dy)); index (0, 0) is the unshifted
    kernel value. Negative distances from roundoff clamp to zero, so the
    unshifted self-correlation is exactly exp(0) = 1.
    """
    if x.values.shape != z.values.shape:
        raise ValueError("patches must share dimensions")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return Patch(_kernel_correlation(x.values, z.values, sigma))


def _kernel_correlation(x: np.ndarray, z: np.ndarray, sigma: float) -> np.ndarray:
    n = x.size
    cross = np.real(np.fft.ifft2(np.fft.fft2(z) * np.conj(np.fft.fft2(x))))
    d = float(np.sum(x * x)) + float(np.sum(z * z)) - 2.0 * cross
    return np.exp(-np.maximum(d, 0.0) / (sigma * sigma * n))


class KcfState:
    kind = TrackerKind.KCF

    def __init__(self, frame: Frame, box: BoundingBox, params: KcfParams, seed: int = 0):
        check_box_in_frame(box, frame)
        self.params = params
        self.frame_width = frame.width
        self.frame_height = frame.height
        self.current_box = box

        padded_w = box.w * params.padding
        padded_h = box.h * params.padding
        self.window_w = _nearest_pow2(padded_w)
        self.window_h = _nearest_pow2(padded_h)
        self.scale_x = padded_w / self.window_w
        self.scale_y = padded_h / self.window_h

        target_w = self.window_w / params.padding
        target_h = self.window_h / params.padding
        label_sigma = params.output_sigma_factor * math.sqrt(target_w * target_h)
        self.y_hat = np.fft.fft2(gaussian_peak(self.window_h, self.window_w, label_sigma))
        self.hann = hann2d((self.window_h, self.window_w))

        x = self._window_patch(frame, box)
        kxx = _kernel_correlation(x, x, params.kernel_sigma)
        self.alpha_hat = self.y_hat / (np.fft.fft2(kxx) + params.lambda_)
        self.template = x
        self.peak_history: list[float] = []

    def _window_patch(self, frame: Frame, box: BoundingBox) -> np.ndarray:
        search = BoundingBox.from_center(
            box.cx, box.cy, box.w * self.params.padding, box.h * self.params.padding
        )
        patch = extract_patch(frame, search, self.window_w, self.window_h)
        return (patch.values / 255.0 - 0.5) * self.hann

    def update(self, frame: Frame) -> TrackOutcome:
        check_same_dims(frame, self.frame_width, self.frame_height)
        p = self.params
        z = self._window_patch(frame, self.current_box)
        kxz = _kernel_correlation(self.template, z, p.kernel_sigma)
        response = np.real(np.fft.ifft2(np.fft.fft2(kxz) * self.alpha_hat))
        peak = float(response.max())
        if (
            len(self.peak_history) >= _MIN_PEAK_HISTORY
            and peak < _PEAK_COLLAPSE_FACTOR * statistics.median(self.peak_history)
        ):
            return TrackOutcome.lost()

        py, px = np.unravel_index(int(np.argmax(response)), response.shape)
        dx = (int(px) - self.window_w // 2) * self.scale_x
        dy = (int(py) - self.window_h // 2) * self.scale_y
        moved = clamp_center_to_frame(
            self.current_box.translated(dx, dy), self.frame_width, self.frame_height
        )

        z_new = self._window_patch(frame, moved)
        kzz = _kernel_correlation(z_new, z_new, p.kernel_sigma)
        alpha_new = self.y_hat / (np.fft.fft2(kzz) + p.lambda_)
        blend = p.interp_factor
        self.template = (1.0 - blend) * self.template + blend * z_new
        self.alpha_hat = (1.0 - blend) * self.alpha_hat + blend * alpha_new
        self.peak_history.append(peak)
        self.current_box = moved
        return TrackOutcome.estimate(moved)
