"""Pixel-grid containers, image I/O, patch sampling and sliding-window stitching.

Grids are plain 2-D numpy arrays indexed ``[row, col]``. The ``as_*`` helpers
validate an array against one of the three grid kinds and return a read-only
copy:

* image       -- any finite real values (float64)
* likelihood  -- values in ``[0, 1]`` (float64)
* mask        -- values exactly 0 or 1 (uint8)
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

MAX_PIXELS = 1 << 26
FIELD_MAGIC = b"SDF1"

KINDS = ("grayscale-image", "mask", "likelihood")


class ImageFormatError(OSError):
    """Raised for unreadable, malformed or unsupported image files."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _check_2d(arr: np.ndarray) -> None:
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D grid, got shape {arr.shape}")
    if arr.size > MAX_PIXELS:
        raise ValueError(f"grid of {arr.size} pixels exceeds the {MAX_PIXELS} limit")


def as_image(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    _check_2d(arr)
    if not np.all(np.isfinite(arr)):
        raise ValueError("image values must be finite")
    return _frozen(arr)


def as_likelihood(values) -> np.ndarray:
    arr = as_image(values)
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("likelihood values must lie in [0, 1]")
    return arr


def as_mask(values) -> np.ndarray:
    arr = np.asarray(values)
    _check_2d(arr)
    if arr.dtype == bool:
        return _frozen(arr.astype(np.uint8))
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("mask values must be exactly 0 or 1")
    return _frozen(arr.astype(np.uint8))


def binarize(likelihood, threshold: float) -> np.ndarray:
    """Foreground wherever ``likelihood >= threshold`` (ties count as foreground)."""
    arr = np.asarray(likelihood, dtype=np.float64)
    return _frozen((arr >= threshold).astype(np.uint8))


# ---------------------------------------------------------------------------
# image files


def _format_for(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix == ".png":
        return "PNG"
    if suffix in (".pgm", ".pnm"):
        return "PPM"
    raise ImageFormatError(f"unsupported image format {suffix!r} (use .png or .pgm)")


def read_gray8(path) -> np.ndarray:
    """Read an 8-bit grayscale PNG or binary PGM (P5) into a uint8 array."""
    path = Path(path)
    _format_for(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode != "L":
                raise ImageFormatError(
                    f"{path}: expected 8-bit grayscale, got mode {im.mode!r}")
            if im.width * im.height > MAX_PIXELS:
                raise ValueError(f"{path}: image dimensions overflow the pixel limit")
            return np.array(im, dtype=np.uint8)
    except FileNotFoundError:
        raise
    except (ImageFormatError, ValueError):
        raise
    except Exception as exc:  # PIL raises a zoo of exception types
        raise ImageFormatError(f"{path}: cannot decode image ({exc})") from exc


def write_gray8(path, pixels: np.ndarray) -> None:
    path = Path(path)
    fmt = _format_for(path)
    pixels = np.asarray(pixels)
    if pixels.dtype != np.uint8:
        raise ValueError("write_gray8 expects uint8 pixels")
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="L").save(buf, format=fmt)
    path.write_bytes(buf.getvalue())


def load_image(path, kind: str = "grayscale-image") -> np.ndarray:
    """Load a grayscale file as an image, a mask or a likelihood map.

    Masks must contain only the values 0 and 255; likelihoods are scaled by
    1/255; plain images keep their raw 0..255 intensities.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
    raw = read_gray8(path)
    if kind == "mask":
        if not np.all((raw == 0) | (raw == 255)):
            raise ValueError(f"{path}: mask contains values other than 0 and 255")
        return as_mask(raw // 255)
    if kind == "likelihood":
        return as_likelihood(raw / 255.0)
    return as_image(raw)


def to_gray8(grid, kind: str = "grayscale-image") -> np.ndarray:
    arr = np.asarray(grid)
    if kind == "mask":
        return as_mask(arr).astype(np.uint8) * 255
    if kind == "likelihood":
        return np.rint(as_likelihood(arr) * 255.0).astype(np.uint8)
    return np.clip(np.rint(as_image(arr)), 0, 255).astype(np.uint8)


def save_image(path, grid, kind: str = "grayscale-image") -> None:
    write_gray8(path, to_gray8(grid, kind))


# ---------------------------------------------------------------------------
# raw float fields ("SDF1" header + little-endian float32)


def write_field(path, field) -> None:
    arr = np.asarray(field, dtype=np.float64)
    _check_2d(arr)
    h, w = arr.shape
    header = FIELD_MAGIC + f"\n{w} {h}\n".encode("ascii")
    Path(path).write_bytes(header + arr.astype("<f4").tobytes())


def read_field(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data.startswith(FIELD_MAGIC + b"\n"):
        raise ImageFormatError(f"{path}: missing SDF1 header")
    try:
        line_end = data.index(b"\n", len(FIELD_MAGIC) + 1)
        w, h = (int(tok) for tok in data[len(FIELD_MAGIC) + 1:line_end].split())
    except ValueError as exc:
        raise ImageFormatError(f"{path}: malformed SDF1 header") from exc
    if w < 1 or h < 1 or w * h > MAX_PIXELS:
        raise ImageFormatError(f"{path}: bad dimensions {w}x{h}")
    body = data[line_end + 1:]
    if len(body) != 4 * w * h:
        raise ImageFormatError(f"{path}: expected {4 * w * h} payload bytes, got {len(body)}")
    return np.frombuffer(body, dtype="<f4").reshape(h, w).astype(np.float64)


# ---------------------------------------------------------------------------
# patches


@dataclass(frozen=True)
class PatchSpec:
    origin: tuple[int, int]
    size: int
    stride: int

    def window(self) -> tuple[slice, slice]:
        r, c = self.origin
        return slice(r, r + self.size), slice(c, c + self.size)


def extract_patches(image, size: int, count: int, seed: int):
    """Sample ``count`` square patches uniformly at random (reproducible per seed)."""
    arr = np.asarray(image)
    h, w = arr.shape
    if size < 1 or size > min(h, w):
        raise ValueError(f"patch size {size} does not fit a {h}x{w} image")
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    rows = rng.integers(0, h - size + 1, size=count)
    cols = rng.integers(0, w - size + 1, size=count)
    out = []
    for r, c in zip(rows.tolist(), cols.tolist()):
        spec = PatchSpec((r, c), size, size)
        out.append((spec, arr[spec.window()].copy()))
    return out


def _tile_starts(extent: int, size: int, stride: int) -> list[int]:
    starts = list(range(0, extent - size + 1, stride))
    if starts[-1] != extent - size:
        starts.append(extent - size)
    return starts


def sliding_window_patches(image, size: int, stride: int | None = None):
    """Tile the image with square windows; the last row/column of tiles is edge-aligned."""
    arr = np.asarray(image)
    h, w = arr.shape
    stride = size if stride is None else stride
    if size < 1 or size > min(h, w):
        raise ValueError(f"patch size {size} does not fit a {h}x{w} image")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    out = []
    for r in _tile_starts(h, size, stride):
        for c in _tile_starts(w, size, stride):
            spec = PatchSpec((r, c), size, stride)
            out.append((spec, arr[spec.window()].copy()))
    return out


def stitch_sliding_window(patches, out_width: int, out_height: int) -> np.ndarray:
    """Average overlapping patches into a ``out_height x out_width`` likelihood map."""
    acc = np.zeros((out_height, out_width))
    hits = np.zeros((out_height, out_width), dtype=np.int64)
    for spec, grid in patches:
        r, c = spec.origin
        if r < 0 or c < 0 or r + spec.size > out_height or c + spec.size > out_width:
            raise ValueError(f"patch at {spec.origin} of size {spec.size} leaves the output")
        rs, cs = spec.window()
        acc[rs, cs] += np.asarray(grid, dtype=np.float64)
        hits[rs, cs] += 1
    if np.any(hits == 0):
        r, c = np.argwhere(hits == 0)[0]
        raise ValueError(f"pixel ({r}, {c}) is not covered by any patch")
    return as_likelihood(np.clip(acc / hits, 0.0, 1.0))

