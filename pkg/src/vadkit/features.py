"""Per-frame feature extraction and the binary feature-sequence cache.

Cache format (little-endian throughout):

    magic  b"FSEQ1"
    u32    T            rows in the matrix (clip length)
    u32    D            feature dimension
    u32    valid_length number of real (non-padding) rows, 1..T
    u16    L            byte length of the class label
    L  x   u8           UTF-8 class label
    T*D x  f32          feature matrix, row-major

The video id is not stored; it is the file stem, one file per video.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .sampling import ClipTensor

MAGIC = b"FSEQ1"
_HEADER = struct.Struct("<III")
_LABEL_LEN = struct.Struct("<H")


class CacheFormatError(ValueError):
    """Raised when a feature cache file is malformed."""


class FeatureExtractionError(RuntimeError):
    """Raised when the backbone adapter fails on a frame."""


@runtime_checkable
class BackboneAdapter(Protocol):
    """Anything that maps one (H, W, 3) frame to a (D,) feature vector."""

    name: str
    output_dim: int

    def evaluate(self, frame: np.ndarray) -> np.ndarray: ...


class MockBackbone:
    """Deterministic stand-in for a convolutional backbone.

    Pools each frame into a small statistics vector (per-channel mean,
    spread, gradient energy, and a brightness centroid), then projects it
    through a fixed random matrix and squashes with tanh. Cheap, stable
    across runs, and sensitive to both appearance and motion, which is
    all the downstream sequence model needs for testing.
    """

    STAT_DIM = 14

    def __init__(self, output_dim: int = 2048, seed: int = 2024):
        if output_dim < 1:
            raise ValueError(f"output_dim must be >= 1, got {output_dim}")
        self.name = "mock"
        self.output_dim = output_dim
        rng = np.random.default_rng(seed)
        self._projection = rng.normal(0.0, 1.0, (output_dim, self.STAT_DIM))
        self._bias = rng.normal(0.0, 0.1, output_dim)

    def _pool(self, frame: np.ndarray) -> np.ndarray:
        f = np.asarray(frame, dtype=np.float64)
        if f.ndim != 3 or f.shape[2] != 3:
            raise ValueError(f"expected a (H, W, 3) frame, got shape {f.shape}")
        stats = np.empty(self.STAT_DIM)
        stats[0:3] = f.mean(axis=(0, 1))
        stats[3:6] = f.std(axis=(0, 1))
        stats[6:9] = np.abs(np.diff(f, axis=1)).mean(axis=(0, 1)) if f.shape[1] > 1 else 0.0
        stats[9:12] = np.abs(np.diff(f, axis=0)).mean(axis=(0, 1)) if f.shape[0] > 1 else 0.0
        brightness = f.mean(axis=2) + 1.0  # [-1, 1] inputs shift to non-negative
        total = brightness.sum()
        if total > 0:
            ys, xs = np.mgrid[0:f.shape[0], 0:f.shape[1]]
            stats[12] = (brightness * ys).sum() / (total * max(f.shape[0] - 1, 1))
            stats[13] = (brightness * xs).sum() / (total * max(f.shape[1] - 1, 1))
        else:
            stats[12:14] = 0.5
        return stats

    def evaluate(self, frame: np.ndarray) -> np.ndarray:
        stats = self._pool(frame)
        return np.tanh(self._projection @ stats + self._bias).astype(np.float32)


class OnnxBackbone:
    """Backbone served by an exported ONNX graph.

    Wraps a single-input, single-output model expecting NCHW float32 and
    producing a flat feature vector. Requires the optional onnxruntime
    dependency at construction time.
    """

    def __init__(self, model_path: str | Path, output_dim: int = 2048):
        try:
            import onnxruntime  # noqa: PLC0415 - optional dependency
        except ImportError as exc:
            raise ImportError(
                "the onnx adapter needs the optional 'onnxruntime' package; "
                "pip install onnxruntime or use the mock adapter"
            ) from exc
        self.name = "onnx"
        self.output_dim = output_dim
        self._session = onnxruntime.InferenceSession(str(model_path))
        self._input_name = self._session.get_inputs()[0].name

    def evaluate(self, frame: np.ndarray) -> np.ndarray:
        batch = np.transpose(np.asarray(frame, np.float32), (2, 0, 1))[np.newaxis]
        out = self._session.run(None, {self._input_name: batch})[0]
        vec = np.asarray(out, np.float32).reshape(-1)
        if vec.shape[0] != self.output_dim:
            raise FeatureExtractionError(
                f"onnx model produced {vec.shape[0]} features, expected {self.output_dim}")
        return vec


def make_adapter(name: str, output_dim: int = 2048, seed: int = 2024,
                 model_path: str | Path | None = None) -> BackboneAdapter:
    if name == "mock":
        return MockBackbone(output_dim=output_dim, seed=seed)
    if name == "onnx":
        if model_path is None:
            raise ValueError("the onnx adapter needs a model path")
        return OnnxBackbone(model_path, output_dim=output_dim)
    raise ValueError(f"unknown backbone adapter '{name}'")


@dataclass(frozen=True)
class FeatureSequence:
    video_id: str
    matrix: np.ndarray  # (T, D) float32
    valid_length: int
    label: str

    def __post_init__(self):
        if self.matrix.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        if not (1 <= self.valid_length <= self.matrix.shape[0]):
            raise ValueError(
                f"valid_length {self.valid_length} outside 1..{self.matrix.shape[0]}")


def extract_features(clip: ClipTensor, adapter: BackboneAdapter,
                     video_id: str = "", label: str = "") -> FeatureSequence:
    """Run the adapter over the valid frames of a clip.

    Padding rows stay exactly zero. Adapter failures are re-raised with
    the offending frame index attached.
    """
    matrix = np.zeros((clip.clip_length, adapter.output_dim), dtype=np.float32)
    for t in range(clip.valid_length):
        try:
            vec = np.asarray(adapter.evaluate(clip.frames[t]), dtype=np.float32)
        except Exception as exc:
            raise FeatureExtractionError(
                f"backbone '{adapter.name}' failed on frame {t}: {exc}") from exc
        if vec.shape != (adapter.output_dim,):
            raise FeatureExtractionError(
                f"backbone '{adapter.name}' returned shape {vec.shape} "
                f"for frame {t}, expected ({adapter.output_dim},)")
        matrix[t] = vec
    return FeatureSequence(video_id, matrix, clip.valid_length, label)


def feature_cache_path(cache_root: str | Path, video_id: str) -> Path:
    return Path(cache_root) / f"{video_id}.fseq"


def store_features(seq: FeatureSequence, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    t_len, dim = seq.matrix.shape
    label_bytes = seq.label.encode("utf-8")
    if len(label_bytes) > 0xFFFF:
        raise ValueError("class label too long to store")
    payload = np.ascontiguousarray(seq.matrix, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(t_len, dim, seq.valid_length))
        fh.write(_LABEL_LEN.pack(len(label_bytes)))
        fh.write(label_bytes)
        fh.write(payload)


def load_features(path: str | Path, expected_dim: int | None = None) -> FeatureSequence:
    path = Path(path)
    blob = path.read_bytes()
    if blob[:len(MAGIC)] != MAGIC:
        raise CacheFormatError(f"{path}: bad magic, not a feature cache file")
    offset = len(MAGIC)
    if len(blob) < offset + _HEADER.size + _LABEL_LEN.size:
        raise CacheFormatError(f"{path}: truncated header")
    t_len, dim, valid = _HEADER.unpack_from(blob, offset)
    offset += _HEADER.size
    (label_len,) = _LABEL_LEN.unpack_from(blob, offset)
    offset += _LABEL_LEN.size
    if len(blob) < offset + label_len:
        raise CacheFormatError(f"{path}: truncated label")
    label = blob[offset:offset + label_len].decode("utf-8")
    offset += label_len
    expected_bytes = t_len * dim * 4
    if len(blob) - offset != expected_bytes:
        raise CacheFormatError(
            f"{path}: payload is {len(blob) - offset} bytes, expected {expected_bytes}")
    if expected_dim is not None and dim != expected_dim:
        raise CacheFormatError(f"{path}: feature dimension {dim}, expected {expected_dim}")
    if not (1 <= valid <= t_len):
        raise CacheFormatError(f"{path}: valid_length {valid} outside 1..{t_len}")
    matrix = np.frombuffer(blob, dtype="<f4", count=t_len * dim, offset=offset)
    matrix = matrix.reshape(t_len, dim).astype(np.float32)
    return FeatureSequence(path.stem, matrix, valid, label)
