"""Frame sequences, ground-truth CSV io, synthetic benchmark footage, patch sampling."""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image
from scipy import ndimage

from .geometry import BoundingBox, GroundTruthTrack

BT601_WEIGHTS = np.array([0.299, 0.587, 0.114])

_FRAME_NAME = re.compile(r"^(\d{6})\.(pgm|png)$")

# Substream tags so every random ingredient of a synthetic sequence draws from
# its own seed-keyed generator. Deliberately preset-independent: calm and
# moving-background share noise, background, and target texture bit for bit.
_TAG_NOISE = 1
_TAG_BACKGROUND = 2
_TAG_TARGET_TEXTURE = 3
_TAG_DISTRACTOR = 4


class LoadError(ValueError):
    """A sequence directory or frame file cannot be loaded as requested."""


class AnnotationError(ValueError):
    """A ground-truth CSV row violates the expected format."""


def round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5)


@dataclass(frozen=True, eq=False)
class Frame:
    index: int
    pixels: np.ndarray  # uint8, shape (height, width)

    def __post_init__(self) -> None:
        p = self.pixels
        if not isinstance(p, np.ndarray) or p.ndim != 2 or p.dtype != np.uint8:
            raise ValueError("frame pixels must be a 2-d uint8 array")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("frame must be at least 1x1")
        if self.index < 0:
            raise ValueError("frame index must be non-negative")

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])


@dataclass(frozen=True, eq=False)
class Sequence:
    name: str
    frames: list[Frame]

    def __post_init__(self) -> None:
        if not self.frames:
            raise ValueError("a sequence needs at least one frame")
        first = self.frames[0]
        for i, f in enumerate(self.frames):
            if f.index != i:
                raise ValueError(f"frame indices must be contiguous from 0, got {f.index} at {i}")
            if f.pixels.shape != first.pixels.shape:
                raise ValueError("all frames in a sequence must share dimensions")

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, index: int) -> Frame:
        return self.frames[index]


# ---------------------------------------------------------------------------
# Frame file io


def read_pgm(path: str | Path) -> np.ndarray:
    """Parse a binary (P5) PGM with maxval 255; comments in the header are allowed."""
    data = Path(path).read_bytes()
    pos = 0

    def token() -> bytes:
        nonlocal pos
        while pos < len(data):
            c = data[pos : pos + 1]
            if c == b"#":
                while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise LoadError(f"truncated PGM header in {path}")
        return data[start:pos]

    magic = token()
    if magic != b"P5":
        raise LoadError(f"{path} is not a binary PGM (magic {magic!r})")
    try:
        width = int(token())
        height = int(token())
        maxval = int(token())
    except ValueError as exc:
        raise LoadError(f"bad PGM header in {path}: {exc}") from exc
    if maxval != 255:
        raise LoadError(f"{path}: only 8-bit PGM (maxval 255) is supported, got {maxval}")
    pos += 1  # single whitespace byte separates header and raster
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise LoadError(f"{path}: raster truncated, expected {width * height} bytes")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(path: str | Path, pixels: np.ndarray) -> None:
    if pixels.ndim != 2 or pixels.dtype != np.uint8:
        raise ValueError("write_pgm expects a 2-d uint8 array")
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def _load_frame_file(path: Path) -> np.ndarray:
    if path.suffix == ".pgm":
        return read_pgm(path)
    img = Image.open(path)
    if img.mode == "L":
        return np.asarray(img, dtype=np.uint8).copy()
    if img.mode in ("RGB", "RGBA", "P", "LA"):
        rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
        luma = rgb @ BT601_WEIGHTS
        return round_half_up(luma).astype(np.uint8)
    raise LoadError(f"unsupported image mode {img.mode!r} in {path.name}")


def load_sequence(directory: str | Path, name: Optional[str] = None) -> Sequence:
    """Load NNNNNN.pgm / NNNNNN.png frames numbered contiguously from 000000."""
    d = Path(directory)
    if not d.is_dir():
        raise LoadError(f"{d} is not a directory")
    found: dict[int, Path] = {}
    for p in sorted(d.iterdir()):
        m = _FRAME_NAME.match(p.name)
        if m is None:
            continue
        idx = int(m.group(1))
        if idx in found:
            raise LoadError(f"frame index {idx:06d} appears twice ({found[idx].name}, {p.name})")
        found[idx] = p
    if not found:
        raise LoadError(f"no frame files (NNNNNN.pgm or NNNNNN.png) in {d}")
    count = max(found) + 1
    for i in range(count):
        if i not in found:
            raise LoadError(f"missing frame {i:06d} in {d}")
    frames = []
    shape = None
    for i in range(count):
        arr = _load_frame_file(found[i])
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise LoadError(
                f"{found[i].name} is {arr.shape[1]}x{arr.shape[0]}, "
                f"expected {shape[1]}x{shape[0]}"
            )
        frames.append(Frame(i, arr))
    return Sequence(name or d.name, frames)


# ---------------------------------------------------------------------------
# Ground-truth CSV


def load_annotations(csv_path: str | Path, frame_count: int) -> GroundTruthTrack:
    """Read frame,x,y,width,height rows; width = height = -1 marks an absent target.

    Frames without a row are absent. The header row is optional.
    """
    if frame_count < 1:
        raise ValueError("frame_count must be positive")
    entries: list[Optional[BoundingBox]] = [None] * frame_count
    seen: set[int] = set()
    with open(csv_path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and row[0].strip().lower() == "frame":
                continue
            if len(row) != 5:
                raise AnnotationError(f"line {lineno}: expected 5 columns, got {len(row)}")
            try:
                idx = int(row[0])
                x, y, w, h = (float(c) for c in row[1:])
            except ValueError as exc:
                raise AnnotationError(f"line {lineno}: {exc}") from exc
            if not (0 <= idx < frame_count):
                raise AnnotationError(
                    f"line {lineno}: frame index {idx} outside [0, {frame_count})"
                )
            if idx in seen:
                raise AnnotationError(f"line {lineno}: duplicate frame index {idx}")
            seen.add(idx)
            if w == -1.0 and h == -1.0:
                entries[idx] = None
            elif w <= 0 or h <= 0:
                raise AnnotationError(
                    f"line {lineno}: non-positive extent w={w} h={h} "
                    "(only width = height = -1 marks absence)"
                )
            else:
                entries[idx] = BoundingBox(x, y, w, h)
    return GroundTruthTrack(entries)


def _format_coord(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def write_annotations(csv_path: str | Path, track: GroundTruthTrack) -> None:
    with open(csv_path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("frame,x,y,width,height\n")
        for i, box in enumerate(track):
            if box is None:
                fh.write(f"{i},-1,-1,-1,-1\n")
            else:
                fh.write(
                    f"{i},{_format_coord(box.x)},{_format_coord(box.y)},"
                    f"{_format_coord(box.w)},{_format_coord(box.h)}\n"
                )


# ---------------------------------------------------------------------------
# Patch sampling


@dataclass(frozen=True, eq=False)
class Patch:
    values: np.ndarray  # float64, shape (height, width)

    def __post_init__(self) -> None:
        v = self.values
        if not isinstance(v, np.ndarray) or v.ndim != 2 or v.dtype != np.float64:
            raise ValueError("patch values must be a 2-d float64 array")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError("patch must be at least 1x1")
        if not np.all(np.isfinite(v)):
            raise ValueError("patch values must be finite")

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def height(self) -> int:
        return int(self.values.shape[0])


def bilinear_sample(values: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample a 2-d array at real-valued (x, y) positions, clamping to the edges."""
    v = np.asarray(values, dtype=np.float64)
    h, w = v.shape
    x = np.clip(np.asarray(xs, dtype=np.float64), 0.0, w - 1.0)
    y = np.clip(np.asarray(ys, dtype=np.float64), 0.0, h - 1.0)
    x0 = np.clip(np.floor(x).astype(np.int64), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(y).astype(np.int64), 0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    top = v[y0, x0] * (1.0 - fx) + v[y0, x1] * fx
    bottom = v[y1, x0] * (1.0 - fx) + v[y1, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def resample_array(values: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Resample a full array to out_w x out_h with the pixel-center convention."""
    h, w = values.shape
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    gx, gy = np.meshgrid(xs, ys)
    return bilinear_sample(values, gx, gy)


def extract_patch(frame: Frame, box: BoundingBox, out_w: int, out_h: int) -> Patch:
    """Bilinearly resample the box region of a frame to out_w x out_h.

    Sample positions follow the half-pixel-center convention, so a box exactly
    aligned with an integer pixel block resampled to its own size reproduces
    the pixel values. Samples outside the frame clamp to the nearest edge.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError("output patch dimensions must be positive")
    if box.w <= 0 or box.h <= 0:
        raise ValueError("box area must be positive")
    xs = box.x + (np.arange(out_w) + 0.5) * (box.w / out_w) - 0.5
    ys = box.y + (np.arange(out_h) + 0.5) * (box.h / out_h) - 0.5
    gx, gy = np.meshgrid(xs, ys)
    return Patch(bilinear_sample(frame.pixels, gx, gy))


# ---------------------------------------------------------------------------
# Synthetic sequences

PRESET_CALM = "calm"
PRESET_AGILE = "agile"
PRESET_MOVING_BACKGROUND = "moving-background"
PRESETS = (PRESET_CALM, PRESET_AGILE, PRESET_MOVING_BACKGROUND)


@dataclass(frozen=True)
class SynthConfig:
    preset: str
    frame_count: int = 300
    width: int = 640
    height: int = 360
    target_size: int = 48
    noise_sigma: float = 2.0
    blur: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}, expected one of {PRESETS}")
        if self.frame_count < 2:
            raise ValueError("frame_count must be at least 2")
        if self.target_size < 8:
            raise ValueError("target_size must be at least 8")
        if self.width < 2 * self.target_size or self.height < 2 * self.target_size:
            raise ValueError(
                "frame must fit the target with a half-size margin: "
                f"need at least {2 * self.target_size} per side"
            )
        if self.preset == PRESET_MOVING_BACKGROUND and self.height < 4 * self.target_size:
            raise ValueError(
                "moving-background preset needs height >= 4 x target_size "
                "to fit the distractor bands"
            )
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")


def _substream(seed: int, *key: int) -> np.random.Generator:
    entropy = [seed & 0xFFFFFFFFFFFFFFFF, *key]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _calm_path(cfg: SynthConfig) -> np.ndarray:
    # Per-axis speed stays below 0.9 px/frame so the integer-rounded path never
    # moves more than 1 px per axis per frame.
    t = np.arange(cfg.frame_count, dtype=np.float64)
    space_x = cfg.width / 2.0 - cfg.target_size - 2.0
    space_y = cfg.height / 2.0 - cfg.target_size - 2.0
    wx = 2.0 * np.pi / cfg.frame_count
    wy = 4.0 * np.pi / cfg.frame_count
    ax = min(space_x, 0.9 / wx)
    ay = min(space_y, 0.9 / wy)
    cx = cfg.width / 2.0 + ax * np.sin(wx * t)
    cy = cfg.height / 2.0 + ay * np.sin(wy * t + 1.3)
    return np.stack([cx, cy], axis=1)


def _agile_path(cfg: SynthConfig) -> np.ndarray:
    t = np.arange(cfg.frame_count, dtype=np.float64)
    space_x = cfg.width / 2.0 - cfg.target_size - 2.0
    space_y = cfg.height / 2.0 - cfg.target_size - 2.0
    if space_x < 12:
        raise ValueError("frame too narrow for the agile preset dynamics")
    cycles = max(2, math.ceil(10.0 * cfg.frame_count / (2.0 * np.pi * space_x)))
    wx = 2.0 * np.pi * cycles / cfg.frame_count
    peak = 2.0 * space_x * math.sin(min(wx / 2.0, np.pi / 2.0))
    if peak < 8.5:
        raise ValueError("frame too small to reach the agile preset peak speed")
    wy = 2.0 * np.pi * 3.0 / cfg.frame_count
    ay = min(space_y, 4.0 / wy)
    cx = cfg.width / 2.0 + space_x * np.sin(wx * t)
    cy = cfg.height / 2.0 + ay * np.sin(wy * t + 0.7)
    return np.stack([cx, cy], axis=1)


def _target_path(cfg: SynthConfig) -> np.ndarray:
    if cfg.preset == PRESET_AGILE:
        return _agile_path(cfg)
    return _calm_path(cfg)  # moving-background reuses the calm trajectory


def _checker_texture(size: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.indices((size, size))
    cell = max(2, size // 6)
    checker = ((xx // cell + yy // cell) % 2).astype(np.float64) * 130.0 + 60.0
    return np.clip(checker + rng.normal(0.0, 12.0, (size, size)), 0.0, 255.0)


def _stripe_texture(w: int, h: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.indices((h, w))
    cell = max(2, min(w, h) // 5)
    stripes = (((xx + 2 * yy) // cell) % 2).astype(np.float64) * 110.0 + 70.0
    return np.clip(stripes + rng.normal(0.0, 10.0, (h, w)), 0.0, 255.0)


def _background(cfg: SynthConfig) -> np.ndarray:
    rng = _substream(cfg.seed, _TAG_BACKGROUND)
    ramp = np.linspace(0.0, 1.0, cfg.height)[:, None]
    base = 96.0 + 48.0 * ramp * np.ones((1, cfg.width))
    rough = rng.normal(0.0, 1.0, (cfg.height, cfg.width))
    smooth = ndimage.uniform_filter(rough, size=31, mode="reflect")
    sd = smooth.std()
    if sd > 1e-12:
        base = base + 8.0 * (smooth / sd)
    return np.clip(base, 0.0, 255.0)


def _motion_kernel(vx: float, vy: float) -> Optional[np.ndarray]:
    """Box kernel along the velocity vector; its length equals the speed."""
    speed = math.hypot(vx, vy)
    length = int(round(speed))
    if length < 2:
        return None
    ux, uy = vx / speed, vy / speed
    radius = (length - 1) / 2.0
    half = int(math.ceil(radius)) + 1
    size = 2 * half + 1
    kernel = np.zeros((size, size))
    for i in range(length):
        px = half + (i - radius) * ux
        py = half + (i - radius) * uy
        x0, y0 = int(math.floor(px)), int(math.floor(py))
        fx, fy = px - x0, py - y0
        kernel[y0, x0] += (1 - fx) * (1 - fy)
        kernel[y0, x0 + 1] += fx * (1 - fy)
        kernel[y0 + 1, x0] += (1 - fx) * fy
        kernel[y0 + 1, x0 + 1] += fx * fy
    return kernel / kernel.sum()


@dataclass(frozen=True)
class _Distractor:
    xs: np.ndarray  # integer left edges per frame
    ys: np.ndarray
    w: int
    h: int
    texture: np.ndarray


def _make_distractors(cfg: SynthConfig, path: np.ndarray) -> list[_Distractor]:
    half = cfg.target_size / 2.0
    top_min = float(path[:, 1].min() - half)  # lowest top edge the target reaches
    bottom_max = float(path[:, 1].max() + half)
    t = np.arange(cfg.frame_count, dtype=np.float64)
    out: list[_Distractor] = []
    bands = (
        (2.0, top_min - 2.0),
        (bottom_max + 2.0, cfg.height - 2.0),
    )
    for i, (lo, hi) in enumerate(bands):
        rng = _substream(cfg.seed, _TAG_DISTRACTOR, i)
        dh = int(min(cfg.target_size * 0.75, hi - lo - 2))
        if dh < 4:
            raise ValueError("not enough vertical room for moving-background distractors")
        dw = int(round(cfg.target_size * 0.75))
        cycles = float(rng.integers(1, 3))
        phase = float(rng.uniform(0.0, 2.0 * np.pi))
        travel = max(cfg.width - dw - 4.0, 1.0)
        cx = 2.0 + travel * (0.5 + 0.5 * np.sin(2.0 * np.pi * cycles * t / cfg.frame_count + phase))
        wiggle = max((hi - lo - dh) / 2.0 - 1.0, 0.0)
        mid = (lo + hi) / 2.0 - dh / 2.0
        cy = mid + wiggle * np.sin(2.0 * np.pi * t / cfg.frame_count + phase * 0.5)
        xs = round_half_up(cx).astype(np.int64)
        ys = round_half_up(np.clip(cy, lo, hi - dh)).astype(np.int64)
        out.append(_Distractor(xs, ys, dw, dh, _stripe_texture(dw, dh, rng)))
    return out


def _paste(canvas: np.ndarray, tile: np.ndarray, x: int, y: int) -> None:
    h, w = tile.shape
    ch, cw = canvas.shape
    x0, y0 = max(x, 0), max(y, 0)
    x1, y1 = min(x + w, cw), min(y + h, ch)
    if x0 >= x1 or y0 >= y1:
        return
    canvas[y0:y1, x0:x1] = tile[y0 - y : y1 - y, x0 - x : x1 - x]


def _paste_alpha(canvas: np.ndarray, tile: np.ndarray, alpha: np.ndarray, x: int, y: int) -> None:
    h, w = tile.shape
    ch, cw = canvas.shape
    x0, y0 = max(x, 0), max(y, 0)
    x1, y1 = min(x + w, cw), min(y + h, ch)
    if x0 >= x1 or y0 >= y1:
        return
    region = canvas[y0:y1, x0:x1]
    t = tile[y0 - y : y1 - y, x0 - x : x1 - x]
    a = alpha[y0 - y : y1 - y, x0 - x : x1 - x]
    canvas[y0:y1, x0:x1] = region * (1.0 - a) + t * a


def generate_synthetic(
    config: SynthConfig, out_dir: str | Path
) -> tuple[Sequence, GroundTruthTrack]:
    """Render a deterministic synthetic sequence and write frames + truth.csv.

    The target is a rigid textured square translated along a smooth path and
    drawn at integer positions, so the emitted ground truth is exact. The
    moving-background preset adds two distractor rectangles whose bands never
    reach the target (distractor geometry goes to distractors.csv). The agile
    preset optionally blurs the target sprite along its per-frame velocity.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    ts = config.target_size
    path = _target_path(config)
    background = _background(config)
    target_tex = _checker_texture(ts, _substream(config.seed, _TAG_TARGET_TEXTURE))
    distractors = (
        _make_distractors(config, path) if config.preset == PRESET_MOVING_BACKGROUND else []
    )

    frames: list[Frame] = []
    boxes: list[Optional[BoundingBox]] = []
    for t in range(config.frame_count):
        canvas = background.copy()
        for d in distractors:
            _paste(canvas, d.texture, int(d.xs[t]), int(d.ys[t]))

        xi = int(round_half_up(np.array(path[t, 0] - ts / 2.0)))
        yi = int(round_half_up(np.array(path[t, 1] - ts / 2.0)))

        kernel = None
        if config.preset == PRESET_AGILE and config.blur:
            vel = path[t] - path[t - 1] if t > 0 else path[1] - path[0]
            kernel = _motion_kernel(float(vel[0]), float(vel[1]))
        if kernel is None:
            _paste(canvas, target_tex, xi, yi)
        else:
            pad = kernel.shape[0] // 2
            sprite = np.zeros((ts + 2 * pad, ts + 2 * pad))
            alpha = np.zeros_like(sprite)
            sprite[pad : pad + ts, pad : pad + ts] = target_tex
            alpha[pad : pad + ts, pad : pad + ts] = 1.0
            sprite = ndimage.convolve(sprite, kernel, mode="constant", cval=0.0)
            alpha = ndimage.convolve(alpha, kernel, mode="constant", cval=0.0)
            _paste_alpha(canvas, sprite, np.clip(alpha, 0.0, 1.0), xi - pad, yi - pad)

        if config.noise_sigma > 0:
            noise_rng = _substream(config.seed, _TAG_NOISE, t)
            canvas = canvas + noise_rng.normal(0.0, config.noise_sigma, canvas.shape)

        pixels = round_half_up(np.clip(canvas, 0.0, 255.0)).astype(np.uint8)
        frames.append(Frame(t, pixels))
        boxes.append(BoundingBox(float(xi), float(yi), float(ts), float(ts)))
        write_pgm(out / f"{t:06d}.pgm", pixels)

    track = GroundTruthTrack(boxes)
    write_annotations(out / "truth.csv", track)
    if distractors:
        with open(out / "distractors.csv", "w", newline="\n", encoding="utf-8") as fh:
            fh.write("frame,id,x,y,width,height\n")
            for t in range(config.frame_count):
                for i, d in enumerate(distractors):
                    fh.write(f"{t},{i},{int(d.xs[t])},{int(d.ys[t])},{d.w},{d.h}\n")
    return Sequence(out.name, frames), track
