import numpy as np
import pytest

from trackbench.media import Frame


def textured(height: int, width: int, seed: int = 0, low: int = 0, high: int = 256) -> np.ndarray:
    """Reproducible non-degenerate texture with structure at several scales."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    base = (
        96.0
        + 60.0 * np.sin(xx / 7.0)
        + 48.0 * np.cos(yy / 5.0)
        + 24.0 * np.sin((xx + yy) / 11.0)
    )
    base += rng.normal(0.0, 12.0, size=(height, width))
    return np.clip(base, low, high - 1).astype(np.uint8)


def frame_of(pixels: np.ndarray, index: int = 0) -> Frame:
    return Frame(index, np.ascontiguousarray(pixels, dtype=np.uint8))


def translate_image(pixels: np.ndarray, dx: int, dy: int, fill: int = 128) -> np.ndarray:
    """Integer translation with constant fill; content moves by (+dx, +dy)."""
    out = np.full_like(pixels, fill)
    h, w = pixels.shape
    sx0, sx1 = max(0, -dx), min(w, w - dx)
    sy0, sy1 = max(0, -dy), min(h, h - dy)
    out[sy0 + dy : sy1 + dy, sx0 + dx : sx1 + dx] = pixels[sy0:sy1, sx0:sx1]
    return out


@pytest.fixture(scope="session")
def calm_sequence(tmp_path_factory):
    from trackbench.media import SynthConfig, generate_synthetic

    out = tmp_path_factory.mktemp("calm")
    return generate_synthetic(
        SynthConfig(preset="calm", frame_count=80, width=320, height=180, target_size=24, seed=11),
        out,
    )
