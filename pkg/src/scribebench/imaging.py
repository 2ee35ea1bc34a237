"""Pixel-level preprocessing: grayscale conversion, normalized box-filter
blur, global thresholding, and fixed-geometry line normalization.

All operations are pure functions from Raster to Raster. Arithmetic is
integer-exact where an oracle needs to reproduce it: window means round
half up, grayscale rounds half up on the weighted sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "Raster",
    "LineGeometry",
    "to_grayscale",
    "box_blur",
    "threshold",
    "invert_binary",
    "expand_binary",
    "normalize_line",
    "preprocess_line",
    "load_png",
    "save_png",
]


@dataclass(frozen=True)
class Raster:
    """8-bit image, 1 or 3 channels, row-major.

    ``array`` has shape (height, width) for grayscale or
    (height, width, 3) for RGB, dtype uint8. Treated as immutable:
    operations return new Rasters and never write through ``array``.
    """

    array: np.ndarray

    def __post_init__(self) -> None:
        a = self.array
        if a.dtype != np.uint8:
            raise ValueError(f"raster must be uint8, got {a.dtype}")
        if a.ndim == 2:
            pass
        elif a.ndim == 3 and a.shape[2] == 3:
            pass
        else:
            raise ValueError(f"raster must be HxW or HxWx3, got shape {a.shape}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"raster dimensions must be >= 1, got {a.shape}")

    @property
    def width(self) -> int:
        return self.array.shape[1]

    @property
    def height(self) -> int:
        return self.array.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.array.ndim == 2 else 3

    @property
    def pixels(self) -> bytes:
        return self.array.tobytes()

    @classmethod
    def new(cls, width: int, height: int, fill: int = 255, channels: int = 1) -> "Raster":
        shape = (height, width) if channels == 1 else (height, width, channels)
        return cls(np.full(shape, fill, dtype=np.uint8))


@dataclass(frozen=True)
class LineGeometry:
    """Target geometry for normalized sentence-line images."""

    target_width: int = 1200
    target_height: int = 110
    background: int = 255
    alignment: str = "right"

    def __post_init__(self) -> None:
        if self.target_width < 1 or self.target_height < 1:
            raise ValueError("target dimensions must be strictly positive")
        if self.alignment not in ("right", "left", "center"):
            raise ValueError(f"unknown alignment {self.alignment!r}")


def to_grayscale(img: Raster) -> Raster:
    """Convert RGB to grayscale with BT.601 weights, rounding half up.

    Grayscale input is returned unchanged.
    """
    if img.channels == 1:
        return img
    rgb = img.array.astype(np.float64)
    y = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    out = np.floor(y + 0.5)
    return Raster(np.clip(out, 0, 255).astype(np.uint8))


def box_blur(img: Raster, k: int) -> Raster:
    """Mean filter with a uniform k-by-k kernel, edge-replicated borders.

    For even k the window for output pixel (x, y) spans rows and columns
    [x - k//2, x + k//2 - 1]; for odd k it is centered. The window mean
    rounds half up. Output dimensions equal input dimensions.
    """
    if img.channels != 1:
        raise ValueError("box_blur expects a 1-channel raster")
    if k <= 0:
        raise ValueError(f"kernel size must be >= 1, got {k}")
    if k == 1:
        return img
    before = k // 2
    after = k - 1 - before
    padded = np.pad(img.array, ((before, after), (before, after)), mode="edge")
    padded = padded.astype(np.int64)
    h, w = img.array.shape
    ii = np.zeros((h + k, w + k), dtype=np.int64)
    ii[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)
    sums = ii[k:, k:] - ii[:-k, k:] - ii[k:, :-k] + ii[:-k, :-k]
    area = k * k
    out = (2 * sums + area) // (2 * area)  # integer round-half-up of sums/area
    return Raster(out.astype(np.uint8))


def threshold(img: Raster, t: int) -> Raster:
    """Binarize: 1 where the pixel value exceeds t, 0 where it is <= t.

    Output values are logical {0, 1}; use expand_binary before writing
    to an image file.
    """
    if img.channels != 1:
        raise ValueError("threshold expects a 1-channel raster")
    if not 0 <= t <= 255:
        raise ValueError(f"threshold must be in [0, 255], got {t}")
    return Raster((img.array > t).astype(np.uint8))


def invert_binary(img: Raster) -> Raster:
    """Flip a logical {0, 1} raster so dark ink becomes foreground."""
    a = img.array
    if a.max(initial=0) > 1:
        raise ValueError("invert_binary expects a logical {0, 1} raster")
    return Raster((1 - a).astype(np.uint8))


def expand_binary(img: Raster) -> Raster:
    """Map a logical {0, 1} raster to stored {0, 255} samples."""
    a = img.array
    if a.max(initial=0) > 1:
        raise ValueError("expand_binary expects a logical {0, 1} raster")
    return Raster((a * 255).astype(np.uint8))


def normalize_line(img: Raster, geom: LineGeometry | None = None) -> Raster:
    """Scale and pad a line image to the exact target geometry.

    Content is scaled by s = min(tw/w, th/h) with nearest-neighbor
    sampling, then padded with the background value. Horizontal placement
    follows ``geom.alignment`` (right by default, for RTL lines); vertical
    padding splits evenly with the extra row at the bottom. Idempotent on
    already-normalized images.
    """
    if img.channels != 1:
        raise ValueError("normalize_line expects a 1-channel raster")
    g = geom if geom is not None else LineGeometry()
    h, w = img.array.shape
    s = min(g.target_width / w, g.target_height / h)
    sw = max(1, min(g.target_width, int(round(w * s))))
    sh = max(1, min(g.target_height, int(round(h * s))))
    xs = (np.arange(sw) * w) // sw
    ys = (np.arange(sh) * h) // sh
    scaled = img.array[np.ix_(ys, xs)]

    out = np.full((g.target_height, g.target_width), g.background, dtype=np.uint8)
    pad_w = g.target_width - sw
    if g.alignment == "right":
        x0 = pad_w
    elif g.alignment == "left":
        x0 = 0
    else:
        x0 = pad_w // 2
    y0 = (g.target_height - sh) // 2
    out[y0 : y0 + sh, x0 : x0 + sw] = scaled
    return Raster(out)


def preprocess_line(
    img: Raster,
    blur_k: int = 4,
    t: int = 127,
    invert: bool = False,
    normalize: bool = True,
    geom: LineGeometry | None = None,
) -> Raster:
    """Full line pipeline: grayscale, blur, threshold, optional invert,
    optional geometry normalization.

    Returns a stored-form binary raster with values {0, 255}. With
    ``invert`` the foreground (ink) is 255; without it the bright paper
    is 255, matching the raw thresholding convention.
    """
    gray = to_grayscale(img)
    blurred = box_blur(gray, blur_k)
    binary = threshold(blurred, t)
    if invert:
        binary = invert_binary(binary)
    stored = expand_binary(binary)
    if normalize:
        background = 0 if invert else 255
        g = geom if geom is not None else LineGeometry(background=background)
        stored = normalize_line(stored, g)
    return stored


def load_png(path: Path | str) -> Raster:
    """Read a PNG as an 8-bit grayscale or RGB raster."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if im.mode in ("P", "RGBA", "CMYK") else "L")
        return Raster(np.asarray(im, dtype=np.uint8))


def save_png(img: Raster, path: Path | str) -> None:
    """Write a raster as PNG. Logical {0, 1} rasters are expanded to
    {0, 255} first, per the stored-binary convention."""
    a = img.array
    if img.channels == 1 and a.max() <= 1:
        a = a * 255
    mode = "L" if img.channels == 1 else "RGB"
    Image.fromarray(a.astype(np.uint8), mode=mode).save(path, format="PNG")
