import numpy as np
import pytest
from PIL import Image

from trackbench.geometry import BoundingBox, jaccard
from trackbench.media import (
    AnnotationError,
    LoadError,
    Patch,
    SynthConfig,
    bilinear_sample,
    extract_patch,
    generate_synthetic,
    load_annotations,
    load_sequence,
    read_pgm,
    write_annotations,
    write_pgm,
)
from .conftest import textured, frame_of


class TestPgm:
    def test_round_trip(self, tmp_path):
        pixels = textured(37, 53, seed=3)
        path = tmp_path / "img.pgm"
        write_pgm(path, pixels)
        back = read_pgm(path)
        assert np.array_equal(back, pixels)

    def test_header_comments_tolerated(self, tmp_path):
        raw = b"P5\n# a comment\n3 2\n# another\n255\n" + bytes(range(6))
        path = tmp_path / "c.pgm"
        path.write_bytes(raw)
        img = read_pgm(path)
        assert img.shape == (2, 3)
        assert img[1, 2] == 5

    def test_rejects_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P2\n2 2\n255\n0 0 0 0")
        with pytest.raises(LoadError):
            read_pgm(path)

    def test_rejects_truncated_raster(self, tmp_path):
        path = tmp_path / "short.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + bytes(7))
        with pytest.raises(LoadError):
            read_pgm(path)

    def test_rejects_wide_maxval(self, tmp_path):
        path = tmp_path / "wide.pgm"
        path.write_bytes(b"P5\n2 2\n65535\n" + bytes(8))
        with pytest.raises(LoadError):
            read_pgm(path)


class TestLoadSequence:
    def _write_frames(self, directory, count, shape=(12, 16)):
        for i in range(count):
            write_pgm(directory / f"{i:06d}.pgm", textured(*shape, seed=i))

    def test_loads_ordered(self, tmp_path):
        self._write_frames(tmp_path, 4)
        seq = load_sequence(tmp_path)
        assert seq.frame_count == 4
        assert [f.index for f in seq.frames] == [0, 1, 2, 3]

    def test_gap_is_error(self, tmp_path):
        self._write_frames(tmp_path, 3)
        (tmp_path / "000001.pgm").unlink()
        with pytest.raises(LoadError, match="000001"):
            load_sequence(tmp_path)

    def test_mixed_dimensions_error(self, tmp_path):
        self._write_frames(tmp_path, 2)
        write_pgm(tmp_path / "000002.pgm", textured(10, 10))
        with pytest.raises(LoadError):
            load_sequence(tmp_path)

    def test_empty_directory_error(self, tmp_path):
        with pytest.raises(LoadError):
            load_sequence(tmp_path)

    def test_png_luma_matches_bt601(self, tmp_path):
        rng = np.random.default_rng(9)
        rgb = rng.integers(0, 256, size=(8, 9, 3), dtype=np.uint8)
        Image.fromarray(rgb, "RGB").save(tmp_path / "000000.png")
        seq = load_sequence(tmp_path)
        r, g, b = rgb[..., 0].astype(np.float64), rgb[..., 1].astype(np.float64), rgb[..., 2].astype(np.float64)
        expected = np.floor(0.299 * r + 0.587 * g + 0.114 * b + 0.5).astype(np.uint8)
        assert np.array_equal(seq[0].pixels, expected)


class TestAnnotations:
    def test_round_trip_with_absence(self, tmp_path):
        boxes = [BoundingBox(1, 2, 3, 4), None, BoundingBox(5.5, 6.5, 7, 8)]
        path = tmp_path / "truth.csv"
        write_annotations(path, boxes)
        track = load_annotations(path, 3)
        assert track[0] == BoundingBox(1, 2, 3, 4)
        assert track[1] is None
        assert track[2] == BoundingBox(5.5, 6.5, 7, 8)

    def test_absence_sentinel_format(self, tmp_path):
        path = tmp_path / "truth.csv"
        write_annotations(path, [None])
        line = path.read_text().splitlines()[1]
        assert line == "0,-1,-1,-1,-1"

    def test_missing_rows_mean_absent(self, tmp_path):
        path = tmp_path / "truth.csv"
        path.write_text("frame,x,y,width,height\n0,1,1,4,4\n2,2,2,4,4\n")
        track = load_annotations(path, 3)
        assert track[1] is None

    def test_duplicate_frame_error(self, tmp_path):
        path = tmp_path / "truth.csv"
        path.write_text("0,1,1,4,4\n0,2,2,4,4\n")
        with pytest.raises(AnnotationError):
            load_annotations(path, 2)

    def test_out_of_range_error(self, tmp_path):
        path = tmp_path / "truth.csv"
        path.write_text("5,1,1,4,4\n")
        with pytest.raises(AnnotationError):
            load_annotations(path, 3)

    def test_nonpositive_size_error(self, tmp_path):
        path = tmp_path / "truth.csv"
        path.write_text("0,1,1,0,4\n")
        with pytest.raises(AnnotationError):
            load_annotations(path, 1)

    def test_malformed_column_count(self, tmp_path):
        path = tmp_path / "truth.csv"
        path.write_text("0,1,1,4\n")
        with pytest.raises(AnnotationError):
            load_annotations(path, 1)


class TestSampling:
    def test_bilinear_exact_on_grid(self):
        img = np.arange(12, dtype=np.float64).reshape(3, 4)
        xs = np.array([[0.0, 3.0]])
        ys = np.array([[0.0, 2.0]])
        out = bilinear_sample(img, xs, ys)
        assert out[0, 0] == 0.0
        assert out[0, 1] == 11.0

    def test_bilinear_midpoint(self):
        img = np.array([[0.0, 10.0], [20.0, 30.0]])
        val = bilinear_sample(img, np.array([[0.5]]), np.array([[0.5]]))
        assert val[0, 0] == pytest.approx(15.0)

    def test_bilinear_clamps_outside(self):
        img = np.array([[1.0, 2.0], [3.0, 4.0]])
        val = bilinear_sample(img, np.array([[-5.0, 10.0]]), np.array([[0.0, 1.0]]))
        assert val[0, 0] == 1.0
        assert val[0, 1] == 4.0

    def test_extract_patch_identity(self):
        pixels = textured(20, 20, seed=1)
        frame = frame_of(pixels)
        patch = extract_patch(frame, BoundingBox(4, 6, 8, 8), 8, 8)
        assert np.allclose(patch.values, pixels[6:14, 4:12].astype(np.float64))

    def test_extract_patch_translation_consistency(self):
        from .conftest import translate_image

        pixels = textured(40, 40, seed=2)
        moved = translate_image(pixels, 4, 2)
        a = extract_patch(frame_of(pixels), BoundingBox(5, 5, 10, 10), 16, 16)
        b = extract_patch(frame_of(moved), BoundingBox(9, 7, 10, 10), 16, 16)
        assert np.allclose(a.values, b.values)

    def test_patch_requires_finite(self):
        with pytest.raises(ValueError):
            Patch(np.array([[np.inf, 0.0]]))


class TestSynthConfigValidation:
    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            SynthConfig(preset="wobble")

    def test_frame_too_small_for_target(self):
        with pytest.raises(ValueError):
            SynthConfig(preset="calm", width=60, height=60, target_size=48)

    def test_moving_background_needs_bands(self):
        with pytest.raises(ValueError):
            SynthConfig(preset="moving-background", width=320, height=100, target_size=48)


class TestGenerator:
    def test_deterministic(self, tmp_path):
        cfg = SynthConfig(preset="calm", frame_count=6, width=160, height=120, target_size=16, seed=5)
        seq_a, truth_a = generate_synthetic(cfg, tmp_path / "a")
        seq_b, truth_b = generate_synthetic(cfg, tmp_path / "b")
        for fa, fb in zip(seq_a.frames, seq_b.frames):
            assert np.array_equal(fa.pixels, fb.pixels)
        assert list(truth_a) == list(truth_b)
        assert (tmp_path / "a" / "truth.csv").read_bytes() == (
            tmp_path / "b" / "truth.csv"
        ).read_bytes()

    def test_truth_is_integer_valued_and_inside(self, calm_sequence):
        seq, truth = calm_sequence
        for box in truth:
            assert box is not None
            assert box.x == int(box.x) and box.y == int(box.y)
            assert 0 <= box.x <= seq[0].width - box.w
            assert 0 <= box.y <= seq[0].height - box.h

    def test_calm_speed_bound(self, calm_sequence):
        _, truth = calm_sequence
        steps = [
            np.hypot(b.x - a.x, b.y - a.y)
            for a, b in zip(list(truth)[:-1], list(truth)[1:])
        ]
        assert max(steps) <= 2.0

    def test_written_truth_matches_returned(self, tmp_path):
        cfg = SynthConfig(preset="calm", frame_count=5, width=160, height=120, target_size=16, seed=2)
        seq, truth = generate_synthetic(cfg, tmp_path)
        reloaded = load_annotations(tmp_path / "truth.csv", seq.frame_count)
        assert list(reloaded) == list(truth)

    def test_agile_has_fast_segments_and_reversals(self, tmp_path):
        cfg = SynthConfig(
            preset="agile", frame_count=60, width=320, height=180, target_size=24, seed=5
        )
        _, truth = generate_synthetic(cfg, tmp_path)
        xs = [b.x for b in truth]
        steps = [abs(b - a) for a, b in zip(xs[:-1], xs[1:])]
        assert max(steps) >= 8.0
        signs = [np.sign(b - a) for a, b in zip(xs[:-1], xs[1:]) if b != a]
        flips = sum(1 for s0, s1 in zip(signs[:-1], signs[1:]) if s0 != s1)
        assert flips >= 2

    def test_distractors_never_overlap_target(self, tmp_path):
        cfg = SynthConfig(
            preset="moving-background",
            frame_count=40,
            width=320,
            height=180,
            target_size=24,
            seed=3,
        )
        seq, truth = generate_synthetic(cfg, tmp_path)
        rows = (tmp_path / "distractors.csv").read_text().splitlines()[1:]
        assert rows
        for row in rows:
            frame_idx, _did, x, y, w, h = row.split(",")
            dbox = BoundingBox(float(x), float(y), float(w), float(h))
            assert jaccard(dbox, truth[int(frame_idx)]) <= 0.1

    def test_presets_share_target_pixels(self, tmp_path):
        base = dict(frame_count=5, width=320, height=180, target_size=24, seed=8)
        seq_calm, truth_calm = generate_synthetic(
            SynthConfig(preset="calm", **base), tmp_path / "c"
        )
        seq_mb, truth_mb = generate_synthetic(
            SynthConfig(preset="moving-background", **base), tmp_path / "m"
        )
        assert list(truth_calm) == list(truth_mb)
        box = truth_calm[2]
        y0, x0 = int(box.y), int(box.x)
        crop = (slice(y0, y0 + int(box.h)), slice(x0, x0 + int(box.w)))
        assert np.array_equal(seq_calm[2].pixels[crop], seq_mb[2].pixels[crop])
