"""Separable 2-D convolution with mirrored borders.

Border handling mirrors without repeating the edge sample (the scheme
cv2 calls BORDER_REFLECT_101 and np.pad calls "reflect"): for a row of
length n the out-of-range index i maps onto a sawtooth with period
2*(n-1). Both implementations below must stay behaviourally identical;
the numpy one doubles as the oracle-friendly fallback.
"""

from __future__ import annotations

import numpy as np

from .. import accel
from ..accel import maybe_njit


@maybe_njit(cache=True, inline="always")
def _mirror(idx: int, n: int) -> int:
    if n == 1:
        return 0
    period = 2 * (n - 1)
    m = idx % period
    if m < 0:
        m += period
    if m >= n:
        m = period - m
    return m


@maybe_njit(cache=True)
def _sepconv_loops(img, kernel):
    h, w, c = img.shape
    k = kernel.shape[0]
    r = k // 2
    tmp = np.empty((h, w, c), dtype=np.float64)
    out = np.empty((h, w, c), dtype=np.float64)
    # horizontal pass
    for i in range(h):
        for j in range(w):
            for ch in range(c):
                acc = 0.0
                for t in range(k):
                    src = _mirror(j + t - r, w)
                    acc += kernel[t] * img[i, src, ch]
                tmp[i, j, ch] = acc
    # vertical pass
    for i in range(h):
        for j in range(w):
            for ch in range(c):
                acc = 0.0
                for t in range(k):
                    src = _mirror(i + t - r, h)
                    acc += kernel[t] * tmp[src, j, ch]
                out[i, j, ch] = acc
    return out


def _convolve_axis_numpy(img: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    r = len(kernel) // 2
    if r == 0:
        return img * kernel[0]
    pad = [(0, 0)] * img.ndim
    pad[axis] = (r, r)
    padded = np.pad(img, pad, mode="reflect")
    out = np.zeros(img.shape, dtype=np.float64)
    for t, coef in enumerate(kernel):
        sl = [slice(None)] * img.ndim
        sl[axis] = slice(t, t + img.shape[axis])
        out += coef * padded[tuple(sl)]
    return out


def _sepconv_numpy(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    tmp = _convolve_axis_numpy(img, kernel, axis=1)
    return _convolve_axis_numpy(tmp, kernel, axis=0)


def separable_convolve(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Convolve (H, W, C) float data with a 1-D kernel along x then y.

    Returns float64 regardless of input dtype. The kernel must have odd
    length; symmetric kernels make the correlation/convolution distinction
    moot, which is the only way this function is used.
    """
    if kernel.ndim != 1 or kernel.shape[0] % 2 == 0:
        raise ValueError("kernel must be 1-D with odd length")
    img = np.asarray(img, dtype=np.float64)
    squeeze = False
    if img.ndim == 2:
        img = img[:, :, np.newaxis]
        squeeze = True
    if img.ndim != 3:
        raise ValueError("expected a (H, W) or (H, W, C) array")
    kernel = np.ascontiguousarray(kernel, dtype=np.float64)
    if accel.NUMBA_ENABLED:
        out = _sepconv_loops(np.ascontiguousarray(img), kernel)
    else:
        out = _sepconv_numpy(img, kernel)
    return out[:, :, 0] if squeeze else out
