"""Detection layer: a configurable ground-truth oracle and an NCC template matcher."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .geometry import BoundingBox, GroundTruthTrack, jaccard
from .media import Frame, Patch, extract_patch, resample_array

# A window whose per-pixel variance is below this (in gray-levels^2) is treated
# as flat: its NCC is defined as 0. Also absorbs FFT roundoff on uniform areas.
_FLAT_VARIANCE = 0.25
_DUPLICATE_OFFSET_FACTOR = 1.5


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    score: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.score):
            raise ValueError("detection score must be finite")


@dataclass(frozen=True)
class OracleConfig:
    miss_prob: float = 0.0
    multi_prob: float = 0.0
    jitter_sigma: float = 0.0
    latency_ms: float = 60.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.miss_prob <= 1.0) or not (0.0 <= self.multi_prob <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.miss_prob + self.multi_prob > 1.0:
            raise ValueError("miss_prob + multi_prob must not exceed 1")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be non-negative")
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be non-negative")


def detect_oracle(
    config: OracleConfig, truth: GroundTruthTrack, frame_index: int
) -> list[Detection]:
    """Ground-truth-backed detector with keyed per-frame randomness.

    Draws depend only on (seed, frame_index), never on call order, so changing
    the re-detection schedule cannot shift the random stream.
    """
    if not (0 <= frame_index < len(truth)):
        raise ValueError(f"frame_index {frame_index} outside [0, {len(truth)})")
    box = truth[frame_index]
    if box is None:
        return []
    rng = np.random.default_rng(
        np.random.SeedSequence([config.seed & 0xFFFFFFFFFFFFFFFF, 20, frame_index])
    )
    roll = float(rng.uniform())
    if roll < config.miss_prob:
        return []
    if roll < config.miss_prob + config.multi_prob:
        duplicate = box.translated(box.w * _DUPLICATE_OFFSET_FACTOR, 0.0)
        return [Detection(box, 1.0), Detection(duplicate, 0.9)]
    if config.jitter_sigma == 0:
        return [Detection(box, 1.0)]
    jx, jy, jw, jh = rng.normal(0.0, config.jitter_sigma, 4)
    w = max(box.w + jw, 1.0)
    h = max(box.h + jh, 1.0)
    return [Detection(BoundingBox.from_center(box.cx + jx, box.cy + jy, w, h), 1.0)]


@dataclass(frozen=True)
class NccConfig:
    template: Patch
    scales: tuple[float, ...] = (1.0,)
    score_threshold: float = 0.6
    nms_jaccard: float = 0.1
    stride: int = 4

    def __post_init__(self) -> None:
        if not self.scales:
            raise ValueError("at least one scale is required")
        if any(s <= 0 for s in self.scales):
            raise ValueError("scales must be positive")
        if not (-1.0 < self.score_threshold < 1.0):
            raise ValueError("score_threshold must lie in (-1, 1)")
        if not (0.0 <= self.nms_jaccard < 1.0):
            raise ValueError("nms_jaccard must lie in [0, 1)")
        if self.stride < 1:
            raise ValueError("stride must be at least 1")


def capture_template(frame: Frame, box: BoundingBox) -> Patch:
    """Cut a template at the box's own (rounded) resolution."""
    return extract_patch(frame, box, max(int(round(box.w)), 2), max(int(round(box.h)), 2))


def _ncc_map(image: np.ndarray, template: np.ndarray) -> np.ndarray:
    """Normalized cross-correlation over all valid placements (zero-mean both sides)."""
    t0 = template - template.mean()
    t_norm = float(np.sqrt(np.sum(t0 * t0)))
    out_shape = (image.shape[0] - template.shape[0] + 1, image.shape[1] - template.shape[1] + 1)
    if t_norm < 1e-9:
        return np.zeros(out_shape)
    flipped = t0[::-1, ::-1]
    numerator = fftconvolve(image, flipped, mode="valid")
    ones = np.ones_like(template)
    window_sum = fftconvolve(image, ones, mode="valid")
    window_sq = fftconvolve(image * image, ones, mode="valid")
    n = template.size
    variance = np.maximum(window_sq - window_sum * window_sum / n, 0.0)
    denominator = np.sqrt(variance) * t_norm
    scores = np.zeros(out_shape)
    solid = variance > _FLAT_VARIANCE * n
    scores[solid] = numerator[solid] / denominator[solid]
    return np.clip(scores, -1.0, 1.0)


def _cell_peaks(scores: np.ndarray, stride: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Best position per stride x stride cell of the score map.

    Thinning by cell maxima rather than corner samples keeps the true peak as
    a candidate at any alignment, so a larger stride never hides a target that
    a dense scan would find.
    """
    mh, mw = scores.shape
    if stride == 1:
        ys, xs = np.mgrid[0:mh, 0:mw]
        return ys.ravel(), xs.ravel(), scores.ravel()
    ny = -(-mh // stride)
    nx = -(-mw // stride)
    padded = np.full((ny * stride, nx * stride), -np.inf)
    padded[:mh, :mw] = scores
    blocks = padded.reshape(ny, stride, nx, stride).transpose(0, 2, 1, 3)
    blocks = blocks.reshape(ny, nx, stride * stride)
    flat = blocks.argmax(axis=2)
    best = np.take_along_axis(blocks, flat[..., None], axis=2)[..., 0]
    ys = np.arange(ny)[:, None] * stride + flat // stride
    xs = np.arange(nx)[None, :] * stride + flat % stride
    return ys.ravel(), xs.ravel(), best.ravel()


def detect_ncc(config: NccConfig, frame: Frame) -> list[Detection]:
    """Multi-scale sliding NCC, thresholded, then greedy non-maximum suppression."""
    tmpl = config.template.values
    if tmpl.shape[1] > frame.width or tmpl.shape[0] > frame.height:
        raise ValueError(
            f"template {tmpl.shape[1]}x{tmpl.shape[0]} exceeds "
            f"frame {frame.width}x{frame.height}"
        )
    image = frame.pixels.astype(np.float64)
    candidates: list[Detection] = []
    for scale in config.scales:
        tw = max(int(round(tmpl.shape[1] * scale)), 4)
        th = max(int(round(tmpl.shape[0] * scale)), 4)
        if tw > frame.width or th > frame.height:
            continue
        scaled = resample_array(tmpl, tw, th) if (tw, th) != tmpl.shape[::-1] else tmpl
        scores = _ncc_map(image, scaled)
        ys, xs, vals = _cell_peaks(scores, config.stride)
        for py, px, val in zip(ys, xs, vals):
            if val > config.score_threshold:
                candidates.append(
                    Detection(
                        BoundingBox(float(px), float(py), float(tw), float(th)),
                        float(val),
                    )
                )
    candidates.sort(key=lambda d: (-d.score, d.box.y, d.box.x))
    kept: list[Detection] = []
    for cand in candidates:
        if all(jaccard(cand.box, k.box) <= config.nms_jaccard for k in kept):
            kept.append(cand)
    return kept


class OracleDetector:
    """Adapter giving the orchestrator a uniform detect() + simulated cost."""

    def __init__(self, config: OracleConfig, truth: GroundTruthTrack):
        self.config = config
        self.truth = truth

    @property
    def sim_cost_ms(self) -> float:
        return self.config.latency_ms

    def detect(self, frame: Frame, frame_index: int) -> list[Detection]:
        return detect_oracle(self.config, self.truth, frame_index)


class NccDetector:
    def __init__(self, config: NccConfig, sim_cost_ms: float = 60.0):
        self.config = config
        self._sim_cost_ms = sim_cost_ms

    @property
    def sim_cost_ms(self) -> float:
        return self._sim_cost_ms

    def detect(self, frame: Frame, frame_index: int) -> list[Detection]:
        return detect_ncc(self.config, frame)
