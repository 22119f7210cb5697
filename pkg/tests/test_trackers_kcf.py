import numpy as np
import pytest

from trackbench.geometry import BoundingBox
from trackbench.media import Patch
from trackbench.trackers import TrackerKind, init, update
from trackbench.trackers.base import KcfParams
from trackbench.trackers.kcf import KcfState, gaussian_kernel_correlation
from .conftest import frame_of, textured, translate_image


def brute_force_kernel(x: np.ndarray, z: np.ndarray, sigma: float) -> np.ndarray:
    """Direct evaluation over every circular shift; shares nothing with the FFT path."""
    h, w = x.shape
    n = x.size
    out = np.zeros((h, w))
    xx = float(np.sum(x * x))
    zz = float(np.sum(z * z))
    for dy in range(h):
        for dx in range(w):
            # k at displacement d compares x against z advanced by d
            shifted = np.roll(np.roll(z, -dy, axis=0), -dx, axis=1)
            cross = float(np.sum(x * shifted))
            d = max(xx + zz - 2.0 * cross, 0.0)
            out[dy, dx] = np.exp(-d / (sigma * sigma * n))
    return out


class TestKernel:
    def test_self_correlation_is_one_at_zero_shift(self):
        x = Patch(np.random.default_rng(0).normal(size=(8, 8)))
        k = gaussian_kernel_correlation(x, x, 0.5)
        assert k.values[0, 0] == pytest.approx(1.0, abs=1e-12)
        assert k.values.max() == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_fft_matches_brute_force_8x8(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(8, 8))
        z = rng.normal(size=(8, 8))
        fast = gaussian_kernel_correlation(Patch(x), Patch(z), 0.4).values
        slow = brute_force_kernel(x, z, 0.4)
        assert np.abs(fast - slow).max() < 1e-6

    def test_circular_shift_moves_argmax(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(16, 16))
        z = np.roll(np.roll(x, 5, axis=0), 3, axis=1)
        k = gaussian_kernel_correlation(Patch(x), Patch(z), 0.4).values
        assert np.unravel_index(k.argmax(), k.shape) == (5, 3)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            gaussian_kernel_correlation(
                Patch(np.zeros((8, 8))), Patch(np.zeros((4, 4))), 0.4
            )

    def test_sigma_domain(self):
        x = Patch(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            gaussian_kernel_correlation(x, x, 0.0)

    def test_values_in_unit_interval(self):
        rng = np.random.default_rng(3)
        x = Patch(rng.normal(size=(8, 8)))
        z = Patch(rng.normal(size=(8, 8)))
        k = gaussian_kernel_correlation(x, z, 0.3).values
        assert k.min() >= 0.0
        assert k.max() <= 1.0 + 1e-12


class TestTrainingResponse:
    def test_training_patch_response_peaks_at_origin(self):
        pixels = textured(128, 128, seed=4)
        state = KcfState(frame_of(pixels), BoundingBox(40, 40, 32, 32), KcfParams(), seed=0)
        x = Patch(state.template)
        k = gaussian_kernel_correlation(x, x, state.params.kernel_sigma)
        response = np.real(np.fft.ifft2(np.fft.fft2(k.values) * state.alpha_hat))
        py, px = np.unravel_index(response.argmax(), response.shape)
        label = np.real(np.fft.ifft2(state.y_hat))
        ly, lx = np.unravel_index(label.argmax(), label.shape)
        assert (py, px) == (ly, lx)
        assert response.max() >= 0.9 * label.max()


class TestTracking:
    def test_follows_translation(self):
        pixels = textured(160, 160, seed=5)
        box = BoundingBox(60, 64, 32, 32)
        state = init(TrackerKind.KCF, frame_of(pixels), box, seed=2)
        state, outcome = update(state, frame_of(translate_image(pixels, 4, -2), 1))
        assert not outcome.is_lost
        assert outcome.box.cx == pytest.approx(box.cx + 4, abs=1.0)
        assert outcome.box.cy == pytest.approx(box.cy - 2, abs=1.0)

    def test_size_never_changes(self):
        pixels = textured(160, 160, seed=5)
        box = BoundingBox(60, 64, 32, 32)
        state = init(TrackerKind.KCF, frame_of(pixels), box, seed=2)
        for i in range(3):
            state, outcome = update(state, frame_of(translate_image(pixels, i, 0), i + 1))
            assert (outcome.box.w, outcome.box.h) == (box.w, box.h)

    def test_lost_after_peak_collapse_and_model_unchanged(self):
        pixels = textured(160, 160, seed=6)
        state = init(TrackerKind.KCF, frame_of(pixels), BoundingBox(60, 60, 32, 32), seed=1)
        # build peak history on easy frames first
        for i in range(4):
            state, outcome = update(state, frame_of(translate_image(pixels, i % 2, 0), i + 1))
            assert not outcome.is_lost
        template_before = state.template.copy()
        alpha_before = state.alpha_hat.copy()
        box_before = state.current_box
        history_before = list(state.peak_history)
        flat = np.full((160, 160), 128, dtype=np.uint8)
        state, outcome = update(state, frame_of(flat, 9))
        assert outcome.is_lost
        assert np.array_equal(state.template, template_before)
        assert np.array_equal(state.alpha_hat, alpha_before)
        assert state.current_box == box_before
        assert state.peak_history == history_before

    def test_no_lost_before_history(self):
        # the collapse gate needs three successes; a hard first frame cannot
        # report Lost, only a bad estimate
        pixels = textured(160, 160, seed=6)
        state = init(TrackerKind.KCF, frame_of(pixels), BoundingBox(60, 60, 32, 32), seed=1)
        flat = np.full((160, 160), 128, dtype=np.uint8)
        state, outcome = update(state, frame_of(flat, 1))
        assert not outcome.is_lost

    def test_deterministic(self):
        pixels = textured(160, 160, seed=8)
        box = BoundingBox(50, 50, 36, 28)
        a = init(TrackerKind.KCF, frame_of(pixels), box, seed=3)
        b = init(TrackerKind.KCF, frame_of(pixels), box, seed=3)
        moved = frame_of(translate_image(pixels, 2, 2), 1)
        _, out_a = update(a, moved)
        _, out_b = update(b, moved)
        assert out_a.box == out_b.box


class TestParams:
    def test_padding_domain(self):
        with pytest.raises(ValueError):
            KcfParams(padding=1.0)

    def test_interp_domain(self):
        with pytest.raises(ValueError):
            KcfParams(interp_factor=0.0)

    def test_window_snaps_to_power_of_two(self):
        pixels = textured(200, 200, seed=1)
        state = KcfState(frame_of(pixels), BoundingBox(50, 50, 40, 30), KcfParams(), seed=0)
        assert state.window_w in (32, 64, 128, 256)
        assert state.window_h in (32, 64, 128, 256)
