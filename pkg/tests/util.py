"""Shared test helpers: synthetic scan transforms and brute-force oracles."""

from __future__ import annotations

import numpy as np

from scribebench.imaging import Raster


def translate_raster(img: Raster, dx: int, dy: int, background: int = 255) -> Raster:
    """Shift content by (dx, dy) pixels on a fixed-size canvas."""
    a = img.array
    out = np.full_like(a, background)
    h, w = a.shape[:2]
    src_x0, src_y0 = max(0, -dx), max(0, -dy)
    dst_x0, dst_y0 = max(0, dx), max(0, dy)
    cw, ch = w - abs(dx), h - abs(dy)
    out[dst_y0 : dst_y0 + ch, dst_x0 : dst_x0 + cw] = a[
        src_y0 : src_y0 + ch, src_x0 : src_x0 + cw
    ]
    return Raster(out)


def rotate_raster(img: Raster, degrees: float, background: int = 255) -> Raster:
    """Rotate about the image center, nearest-neighbor, fixed canvas."""
    a = img.array
    h, w = a.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    theta = np.deg2rad(degrees)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    ys, xs = np.mgrid[0:h, 0:w]
    # inverse map: rotate output coords by -theta around the center
    rel_x = xs - cx
    rel_y = ys - cy
    src_x = np.round(cos_t * rel_x + sin_t * rel_y + cx).astype(int)
    src_y = np.round(-sin_t * rel_x + cos_t * rel_y + cy).astype(int)
    valid = (src_x >= 0) & (src_x < w) & (src_y >= 0) & (src_y < h)
    out = np.full_like(a, background)
    out[valid] = a[src_y[valid], src_x[valid]]
    return Raster(out)


def rotate_point(x: float, y: float, cx: float, cy: float, degrees: float) -> tuple[float, float]:
    """Forward-rotate a point the same way rotate_raster moves content."""
    theta = np.deg2rad(degrees)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    rel_x, rel_y = x - cx, y - cy
    return (cos_t * rel_x - sin_t * rel_y + cx, sin_t * rel_x + cos_t * rel_y + cy)


def brute_force_box_mean(a: np.ndarray, k: int) -> np.ndarray:
    """Nested-loop windowed mean with edge replication and round-half-up."""
    h, w = a.shape
    out = np.zeros_like(a)
    lo = k // 2
    for y in range(h):
        for x in range(w):
            total = 0
            for wy in range(y - lo, y - lo + k):
                for wx in range(x - lo, x - lo + k):
                    cy = min(max(wy, 0), h - 1)
                    cx = min(max(wx, 0), w - 1)
                    total += int(a[cy, cx])
            mean = total / (k * k)
            out[y, x] = int(np.floor(mean + 0.5))
    return out


def brute_force_edit_distance(ref, hyp) -> int:
    """Plain two-row DP distance, no backtrace; independent oracle."""
    if len(ref) < len(hyp):
        ref, hyp = hyp, ref
    prev = list(range(len(hyp) + 1))
    for i, r in enumerate(ref, start=1):
        cur = [i]
        for j, h in enumerate(hyp, start=1):
            cur.append(min(prev[j] + 1, cur[-1] + 1, prev[j - 1] + (r != h)))
        prev = cur
    return prev[-1]
