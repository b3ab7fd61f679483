"""Fixed-length clip assembly from suppressed frame sequences.

A video of any length becomes a (clip_length, H, W, 3) float32 tensor:
frames are picked at uniform fractional stride, resized bilinearly, and
value-scaled to [-1, 1]; short videos keep every frame and pad the tail
with zeros. valid_length records how many leading rows are real.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .kernels.resize import bilinear_resize

PRESET_SHAPES = {
    "wide": (299, 224),   # height, width
    "square": (299, 299),
}


@dataclass(frozen=True)
class SamplerParams:
    clip_length: int = 32
    target_height: int = 299
    target_width: int = 224
    preprocess: str = "backbone_scaling"  # or "none"

    def __post_init__(self):
        if self.clip_length < 1:
            raise ValueError(f"clip_length must be >= 1, got {self.clip_length}")
        if self.target_height < 1 or self.target_width < 1:
            raise ValueError("target frame size must be positive")
        if self.preprocess not in ("backbone_scaling", "none"):
            raise ValueError(f"unknown preprocess mode '{self.preprocess}'")


@dataclass(frozen=True)
class ClipTensor:
    frames: np.ndarray  # (clip_length, H, W, 3) float32
    valid_length: int

    def __post_init__(self):
        if self.frames.ndim != 4 or self.frames.shape[3] != 3:
            raise ValueError("clip tensor must be (T, H, W, 3)")
        if not (0 < self.valid_length <= self.frames.shape[0]):
            raise ValueError("valid_length must lie in 1..clip_length")

    @property
    def clip_length(self) -> int:
        return self.frames.shape[0]


def uniform_sample_indices(total_frames: int, target: int) -> list[int]:
    """Pick target frame indices at uniform fractional stride.

    index_i = floor(i * total / target). When total < target, every frame
    is kept once (the caller pads). Indices are non-decreasing and start
    at 0.
    """
    if target < 1:
        raise ValueError(f"target must be >= 1, got {target}")
    if total_frames < 0:
        raise ValueError(f"total_frames must be >= 0, got {total_frames}")
    if total_frames < target:
        return list(range(total_frames))
    return [(i * total_frames) // target for i in range(target)]


def resize_frame(frame: np.ndarray, target_height: int, target_width: int) -> np.ndarray:
    """Bilinear resize preserving dtype; a size-matching input is copied."""
    frame = np.asarray(frame)
    if frame.shape[0] == target_height and frame.shape[1] == target_width:
        return frame.copy()
    out = bilinear_resize(frame, target_height, target_width)
    if np.issubdtype(frame.dtype, np.integer):
        info = np.iinfo(frame.dtype)
        return np.clip(np.rint(out), info.min, info.max).astype(frame.dtype)
    return out.astype(frame.dtype)


def backbone_preprocess(frame: np.ndarray) -> np.ndarray:
    """Map 8-bit pixel values onto [-1, 1] float32 (x / 127.5 - 1)."""
    return np.asarray(frame, dtype=np.float32) / np.float32(127.5) - np.float32(1.0)


def _as_rgb(frame: np.ndarray) -> np.ndarray:
    if frame.ndim == 2:
        return np.repeat(frame[:, :, np.newaxis], 3, axis=2)
    if frame.ndim == 3 and frame.shape[2] == 1:
        return np.repeat(frame, 3, axis=2)
    if frame.ndim == 3 and frame.shape[2] == 3:
        return frame
    raise ValueError(f"expected 1- or 3-channel frame, got shape {frame.shape}")


def assemble_clip(frames: Sequence[np.ndarray],
                  params: SamplerParams | None = None) -> ClipTensor:
    """Sample, resize, and scale frames into a fixed-length clip tensor."""
    params = params or SamplerParams()
    if len(frames) == 0:
        raise ValueError("cannot assemble a clip from zero frames")
    indices = uniform_sample_indices(len(frames), params.clip_length)
    rows = []
    for idx in indices:
        frame = _as_rgb(np.asarray(frames[idx]))
        frame = resize_frame(frame, params.target_height, params.target_width)
        if params.preprocess == "backbone_scaling":
            frame = backbone_preprocess(frame)
        else:
            frame = np.asarray(frame, dtype=np.float32)
        rows.append(frame)
    valid = len(rows)
    while len(rows) < params.clip_length:
        rows.append(np.zeros_like(rows[0]))
    return ClipTensor(np.stack(rows).astype(np.float32), valid)
