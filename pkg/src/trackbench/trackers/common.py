"""Small helpers shared by the tracker implementations."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..geometry import BoundingBox
from ..media import Frame


@lru_cache(maxsize=32)
def hann2d(shape: tuple[int, int]) -> np.ndarray:
    h, w = shape
    return np.outer(np.hanning(h), np.hanning(w))


def gaussian_peak(height: int, width: int, sigma: float) -> np.ndarray:
    """Unit-peak Gaussian centered at (height // 2, width // 2)."""
    cy, cx = height // 2, width // 2
    yy, xx = np.indices((height, width), dtype=np.float64)
    return np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * sigma * sigma))


def check_box_in_frame(box: BoundingBox, frame: Frame) -> None:
    if box.x < 0 or box.y < 0 or box.x + box.w > frame.width or box.y + box.h > frame.height:
        raise ValueError(
            f"box ({box.x}, {box.y}, {box.w}, {box.h}) is not inside "
            f"the {frame.width}x{frame.height} frame"
        )


def check_same_dims(frame: Frame, width: int, height: int) -> None:
    if frame.width != width or frame.height != height:
        raise ValueError(
            f"frame is {frame.width}x{frame.height}, tracker was initialized on {width}x{height}"
        )


def clamp_center_to_frame(box: BoundingBox, width: int, height: int) -> BoundingBox:
    """Keep the box center inside the frame rectangle; size is preserved."""
    cx = min(max(box.cx, 0.0), float(width) - 1.0)
    cy = min(max(box.cy, 0.0), float(height) - 1.0)
    if cx == box.cx and cy == box.cy:
        return box
    return BoundingBox.from_center(cx, cy, box.w, box.h)


def subseed(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, *key]))
