"""Background suppression around tracked people.

Each frame is rebuilt as I_out = I * M + blur(I) * (1 - M): pixels
inside any (margin-expanded) person box keep their original values,
everything else comes from a heavily Gaussian-blurred copy. The mask is
hard binary; boxes rasterise by flooring their start and ceiling their
end coordinate, so any partially covered pixel counts as foreground.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .data import BoundingBox, TrackRecord, clamp_box, expand_box
from .kernels.sepconv import separable_convolve


@dataclass(frozen=True)
class SuppressionParams:
    margin: int = 30
    kernel_size: int = 51
    sigma: float = 0.0  # 0 derives sigma from the kernel size

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError(f"margin must be >= 0, got {self.margin}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd and >= 1, got {self.kernel_size}")


def derived_sigma(kernel_size: int) -> float:
    # 0.3 * ((kernel_size - 1) * 0.5 - 1) + 0.8, written so k = 51 gives 8.0 exactly
    return 0.15 * (kernel_size - 1) + 0.5


def gaussian_kernel(kernel_size: int, sigma: float = 0.0) -> np.ndarray:
    """Normalised 1-D Gaussian taps; sigma <= 0 derives sigma from size."""
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise ValueError(f"kernel_size must be odd and >= 1, got {kernel_size}")
    if sigma <= 0.0:
        sigma = derived_sigma(kernel_size)
    offsets = np.arange(kernel_size, dtype=np.float64) - (kernel_size - 1) / 2.0
    weights = np.exp(-(offsets ** 2) / (2.0 * sigma * sigma))
    return weights / weights.sum()


def _restore_dtype(values: np.ndarray, dtype: np.dtype) -> np.ndarray:
    if np.issubdtype(dtype, np.integer):
        info = np.iinfo(dtype)
        return np.clip(np.rint(values), info.min, info.max).astype(dtype)
    return values.astype(dtype)


def blur_frame(frame: np.ndarray, params: SuppressionParams) -> np.ndarray:
    """Gaussian-blur a frame, preserving its dtype.

    kernel_size 1 is the identity. Integer inputs round to nearest on the
    way back.
    """
    frame = np.asarray(frame)
    kernel = gaussian_kernel(params.kernel_size, params.sigma)
    blurred = separable_convolve(frame, kernel)
    return _restore_dtype(blurred, frame.dtype)


def person_mask(shape: tuple[int, int], boxes: Iterable[BoundingBox],
                margin: int = 0) -> np.ndarray:
    """Binary uint8 mask, 1 inside any margin-expanded box.

    Boxes that do not intersect the frame at all contribute nothing.
    """
    frame_h, frame_w = shape
    mask = np.zeros((frame_h, frame_w), dtype=np.uint8)
    for box in boxes:
        try:
            expanded = expand_box(box, margin, frame_h, frame_w) if margin else \
                clamp_box(box, frame_h, frame_w)
        except ValueError:
            continue
        x1 = int(math.floor(expanded.x))
        y1 = int(math.floor(expanded.y))
        x2 = int(math.ceil(expanded.x2))
        y2 = int(math.ceil(expanded.y2))
        mask[max(y1, 0):min(y2, frame_h), max(x1, 0):min(x2, frame_w)] = 1
    return mask


def compose_suppressed_frame(frame: np.ndarray, mask: np.ndarray,
                             blurred: np.ndarray) -> np.ndarray:
    """Pick frame pixels where mask is set, blurred pixels elsewhere."""
    frame = np.asarray(frame)
    blurred = np.asarray(blurred)
    mask = np.asarray(mask)
    if frame.shape != blurred.shape:
        raise ValueError(f"frame {frame.shape} and blurred {blurred.shape} differ")
    if mask.shape != frame.shape[:2]:
        raise ValueError(f"mask {mask.shape} does not match frame {frame.shape[:2]}")
    selector = mask.astype(bool)
    if frame.ndim == 3:
        selector = selector[:, :, np.newaxis]
    return np.where(selector, frame, blurred)


def suppress_frame(frame: np.ndarray, boxes: Sequence[BoundingBox],
                   params: SuppressionParams) -> np.ndarray:
    """Suppress one frame given the person boxes visible in it.

    No boxes means nothing to keep: the whole frame is blurred.
    """
    mask = person_mask(frame.shape[:2], boxes, params.margin)
    blurred = blur_frame(frame, params)
    return compose_suppressed_frame(frame, mask, blurred)


def suppress_video(frames: Sequence[np.ndarray], records: Iterable[TrackRecord],
                   params: SuppressionParams | None = None) -> list[np.ndarray]:
    """Suppress every frame of a video using its track log."""
    params = params or SuppressionParams()
    by_frame: dict[int, list[BoundingBox]] = {}
    for record in records:
        by_frame.setdefault(record.frame_index, []).append(record.box)
    return [suppress_frame(frame, by_frame.get(i, ()), params)
            for i, frame in enumerate(frames)]
