"""Parameter container, initialisation, and the binary checkpoint format.

Checkpoint layout (little-endian):

    magic  b"SEQC1"
    u32    input_dim, num_classes, rnn1_units, rnn2_units, dense_units
    u8     bidirectional flag
    f64    dropout1, dropout2, l2_lambda, input_dropout, recurrent_dropout
    f32[]  every parameter tensor, row-major, in named_arrays() order

Config floats are stored as f64 so a reloaded model reproduces losses
bit for bit; parameters themselves live in float32.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .config import ArchConfig

MAGIC = b"SEQC1"
_CONFIG_INTS = struct.Struct("<IIIII")
_CONFIG_FLAG = struct.Struct("<B")
_CONFIG_FLOATS = struct.Struct("<ddddd")


class CheckpointFormatError(ValueError):
    """Raised when a checkpoint file is malformed."""


@dataclass
class LstmLayerParams:
    w: np.ndarray  # (4u, d) input kernel
    u: np.ndarray  # (4u, u) recurrent kernel
    b: np.ndarray  # (4u,)


@dataclass
class ModelParams:
    config: ArchConfig
    rnn1: list[LstmLayerParams]  # one entry per direction
    rnn2: list[LstmLayerParams]
    dense_w: np.ndarray
    dense_b: np.ndarray
    out_w: np.ndarray
    out_b: np.ndarray

    _DIRECTION_NAMES = ("fwd", "bwd")

    def named_arrays(self) -> Iterator[tuple[str, np.ndarray]]:
        """Yield (name, tensor) in the fixed serialisation order."""
        for layer_name, layer in (("rnn1", self.rnn1), ("rnn2", self.rnn2)):
            for direction, p in zip(self._DIRECTION_NAMES, layer):
                yield f"{layer_name}_{direction}_w", p.w
                yield f"{layer_name}_{direction}_u", p.u
                yield f"{layer_name}_{direction}_b", p.b
        yield "dense_w", self.dense_w
        yield "dense_b", self.dense_b
        yield "out_w", self.out_w
        yield "out_b", self.out_b

    def as_dict(self) -> dict[str, np.ndarray]:
        return dict(self.named_arrays())

    def copy(self) -> "ModelParams":
        return ModelParams(
            config=self.config,
            rnn1=[LstmLayerParams(p.w.copy(), p.u.copy(), p.b.copy()) for p in self.rnn1],
            rnn2=[LstmLayerParams(p.w.copy(), p.u.copy(), p.b.copy()) for p in self.rnn2],
            dense_w=self.dense_w.copy(), dense_b=self.dense_b.copy(),
            out_w=self.out_w.copy(), out_b=self.out_b.copy(),
        )

    def astype(self, dtype) -> "ModelParams":
        cast = np.dtype(dtype)
        return ModelParams(
            config=self.config,
            rnn1=[LstmLayerParams(p.w.astype(cast), p.u.astype(cast), p.b.astype(cast))
                  for p in self.rnn1],
            rnn2=[LstmLayerParams(p.w.astype(cast), p.u.astype(cast), p.b.astype(cast))
                  for p in self.rnn2],
            dense_w=self.dense_w.astype(cast), dense_b=self.dense_b.astype(cast),
            out_w=self.out_w.astype(cast), out_b=self.out_b.astype(cast),
        )

    @property
    def dtype(self) -> np.dtype:
        return self.dense_w.dtype


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    # fan_in = cols (inputs), fan_out = rows (outputs)
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, (rows, cols))


def _orthogonal_stack(rng: np.random.Generator, units: int, blocks: int = 4) -> np.ndarray:
    out = np.empty((blocks * units, units))
    for g in range(blocks):
        q, r = np.linalg.qr(rng.normal(0.0, 1.0, (units, units)))
        q = q * np.sign(np.diag(r))
        out[g * units:(g + 1) * units] = q
    return out


def _init_lstm_layer(rng: np.random.Generator, units: int, in_dim: int) -> LstmLayerParams:
    w = _glorot(rng, 4 * units, in_dim)
    u = _orthogonal_stack(rng, units)
    b = np.zeros(4 * units)
    b[units:2 * units] = 1.0  # forget-gate bias starts open
    return LstmLayerParams(w, u, b)


def init_params(config: ArchConfig, seed: int = 0, dtype=np.float32) -> ModelParams:
    """Draw fresh parameters: Glorot kernels, orthogonal recurrences,
    zero biases with the forget block at one."""
    rng = np.random.default_rng(seed)
    rnn1 = [_init_lstm_layer(rng, config.rnn1_units, config.input_dim)
            for _ in range(config.directions)]
    rnn2 = [_init_lstm_layer(rng, config.rnn2_units, config.rnn1_out_dim)
            for _ in range(config.directions)]
    dense_w = _glorot(rng, config.dense_units, config.context_dim)
    dense_b = np.zeros(config.dense_units)
    out_w = _glorot(rng, config.num_classes, config.dense_units)
    out_b = np.zeros(config.num_classes)
    params = ModelParams(config, rnn1, rnn2, dense_w, dense_b, out_w, out_b)
    return params.astype(dtype)


def save_checkpoint(params: ModelParams, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cfg = params.config
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_CONFIG_INTS.pack(cfg.input_dim, cfg.num_classes,
                                   cfg.rnn1_units, cfg.rnn2_units, cfg.dense_units))
        fh.write(_CONFIG_FLAG.pack(1 if cfg.bidirectional else 0))
        fh.write(_CONFIG_FLOATS.pack(cfg.dropout1, cfg.dropout2, cfg.l2_lambda,
                                     cfg.input_dropout, cfg.recurrent_dropout))
        for _name, arr in params.named_arrays():
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path) -> ModelParams:
    path = Path(path)
    blob = path.read_bytes()
    if blob[:len(MAGIC)] != MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic, not a model checkpoint")
    offset = len(MAGIC)
    need = _CONFIG_INTS.size + _CONFIG_FLAG.size + _CONFIG_FLOATS.size
    if len(blob) < offset + need:
        raise CheckpointFormatError(f"{path}: truncated config block")
    input_dim, num_classes, u1, u2, dense_units = _CONFIG_INTS.unpack_from(blob, offset)
    offset += _CONFIG_INTS.size
    (flag,) = _CONFIG_FLAG.unpack_from(blob, offset)
    offset += _CONFIG_FLAG.size
    d1, d2, l2, in_drop, rec_drop = _CONFIG_FLOATS.unpack_from(blob, offset)
    offset += _CONFIG_FLOATS.size
    try:
        config = ArchConfig(input_dim=input_dim, num_classes=num_classes,
                            rnn1_units=u1, rnn2_units=u2, dense_units=dense_units,
                            bidirectional=bool(flag), dropout1=d1, dropout2=d2,
                            l2_lambda=l2, input_dropout=in_drop, recurrent_dropout=rec_drop)
    except ValueError as exc:
        raise CheckpointFormatError(f"{path}: invalid config block: {exc}") from exc

    template = init_params(config, seed=0, dtype=np.float32)
    total = sum(arr.size for _n, arr in template.named_arrays())
    if len(blob) - offset != total * 4:
        raise CheckpointFormatError(
            f"{path}: parameter payload is {len(blob) - offset} bytes, "
            f"expected {total * 4}")
    for _name, arr in template.named_arrays():
        flat = np.frombuffer(blob, dtype="<f4", count=arr.size, offset=offset)
        arr[...] = flat.reshape(arr.shape)
        offset += arr.size * 4
    return template
