"""Tracker kinds, per-kind parameter sets, and the update outcome type."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from ..geometry import BoundingBox


class TrackerKind(Enum):
    MOSSE = "mosse"
    KCF = "kcf"
    MEDIANFLOW = "medianflow"


@dataclass(frozen=True)
class TrackOutcome:
    """Either an estimated box for this frame or a declared tracking failure."""

    box: Optional[BoundingBox]

    @property
    def is_lost(self) -> bool:
        return self.box is None

    @classmethod
    def estimate(cls, box: BoundingBox) -> "TrackOutcome":
        if box is None:
            raise ValueError("an estimate needs a box")
        return cls(box)

    @classmethod
    def lost(cls) -> "TrackOutcome":
        return cls(None)


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class MosseParams:
    window: int = 64
    sigma_target: float = 2.0
    learning_rate: float = 0.125
    reg_eps: float = 1e-5
    psr_threshold: float = 7.0
    init_perturbations: int = 8

    def __post_init__(self) -> None:
        if self.window < 16 or not _is_power_of_two(self.window):
            raise ValueError("window must be a power of two, at least 16")
        if self.sigma_target <= 0:
            raise ValueError("sigma_target must be positive")
        if not (0.0 < self.learning_rate <= 1.0):
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.reg_eps <= 0:
            raise ValueError("reg_eps must be positive")
        if self.init_perturbations < 0:
            raise ValueError("init_perturbations must be non-negative")


@dataclass(frozen=True)
class KcfParams:
    padding: float = 1.5
    kernel_sigma: float = 0.2
    lambda_: float = 1e-4
    output_sigma_factor: float = 0.1
    interp_factor: float = 0.075

    def __post_init__(self) -> None:
        if self.padding <= 1.0:
            raise ValueError("padding must exceed 1")
        if self.kernel_sigma <= 0:
            raise ValueError("kernel_sigma must be positive")
        if self.lambda_ <= 0:
            raise ValueError("lambda_ must be positive")
        if self.output_sigma_factor <= 0:
            raise ValueError("output_sigma_factor must be positive")
        if not (0.0 < self.interp_factor <= 1.0):
            raise ValueError("interp_factor must lie in (0, 1]")


@dataclass(frozen=True)
class MedianFlowParams:
    grid: int = 10
    pyramid_levels: int = 3
    lk_window: int = 11
    lk_iterations: int = 20
    fb_error_max: float = 10.0
    ncc_patch: int = 10

    def __post_init__(self) -> None:
        if self.grid < 3:
            raise ValueError("grid must be at least 3")
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be at least 1")
        if self.lk_window < 3 or self.lk_window % 2 == 0:
            raise ValueError("lk_window must be odd and at least 3")
        if self.lk_iterations < 1:
            raise ValueError("lk_iterations must be at least 1")
        if self.fb_error_max <= 0:
            raise ValueError("fb_error_max must be positive")
        if self.ncc_patch < 3:
            raise ValueError("ncc_patch must be at least 3")
