"""Bilinear image resize.

Source coordinates follow the half-pixel convention
src = (dst + 0.5) * scale - 0.5 (the cv2/TF "align_corners=False"
mapping), clamped to the valid range so border pixels replicate.
"""

from __future__ import annotations

import numpy as np

from .. import accel
from ..accel import maybe_njit


@maybe_njit(cache=True)
def _resize_loops(img, dst_h, dst_w):
    src_h, src_w, c = img.shape
    out = np.empty((dst_h, dst_w, c), dtype=np.float64)
    scale_y = src_h / dst_h
    scale_x = src_w / dst_w
    for i in range(dst_h):
        sy = (i + 0.5) * scale_y - 0.5
        if sy < 0.0:
            sy = 0.0
        if sy > src_h - 1:
            sy = src_h - 1.0
        y0 = int(sy)
        fy = sy - y0
        y1 = y0 + 1 if y0 + 1 < src_h else src_h - 1
        for j in range(dst_w):
            sx = (j + 0.5) * scale_x - 0.5
            if sx < 0.0:
                sx = 0.0
            if sx > src_w - 1:
                sx = src_w - 1.0
            x0 = int(sx)
            fx = sx - x0
            x1 = x0 + 1 if x0 + 1 < src_w else src_w - 1
            for ch in range(c):
                top = img[y0, x0, ch] * (1.0 - fx) + img[y0, x1, ch] * fx
                bot = img[y1, x0, ch] * (1.0 - fx) + img[y1, x1, ch] * fx
                out[i, j, ch] = top * (1.0 - fy) + bot * fy
    return out


def _axis_coords(src_n: int, dst_n: int):
    coords = (np.arange(dst_n, dtype=np.float64) + 0.5) * (src_n / dst_n) - 0.5
    coords = np.clip(coords, 0.0, src_n - 1)
    lo = coords.astype(np.int64)
    frac = coords - lo
    hi = np.minimum(lo + 1, src_n - 1)
    return lo, hi, frac


def _resize_numpy(img: np.ndarray, dst_h: int, dst_w: int) -> np.ndarray:
    src_h, src_w, _ = img.shape
    y0, y1, fy = _axis_coords(src_h, dst_h)
    x0, x1, fx = _axis_coords(src_w, dst_w)
    fy = fy[:, np.newaxis, np.newaxis]
    fx = fx[np.newaxis, :, np.newaxis]
    top = img[y0][:, x0] * (1.0 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1.0 - fx) + img[y1][:, x1] * fx
    return top * (1.0 - fy) + bot * fy


def bilinear_resize(img: np.ndarray, dst_h: int, dst_w: int) -> np.ndarray:
    """Resize (H, W, C) or (H, W) data to (dst_h, dst_w). Returns float64."""
    if dst_h < 1 or dst_w < 1:
        raise ValueError("target size must be positive")
    img = np.asarray(img, dtype=np.float64)
    squeeze = False
    if img.ndim == 2:
        img = img[:, :, np.newaxis]
        squeeze = True
    if img.ndim != 3:
        raise ValueError("expected a (H, W) or (H, W, C) array")
    if accel.NUMBA_ENABLED:
        out = _resize_loops(np.ascontiguousarray(img), dst_h, dst_w)
    else:
        out = _resize_numpy(img, dst_h, dst_w)
    return out[:, :, 0] if squeeze else out
