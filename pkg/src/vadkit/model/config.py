"""Architecture configuration for the sequence classifier."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class ArchConfig:
    """Shape and regularisation of the two-layer recurrent classifier.

    Layer 1 runs over the feature sequence and returns its full hidden
    trace; layer 2 consumes that trace and keeps only its final state.
    When bidirectional is set both layers run in each direction and
    concatenate, doubling their effective width. Dropout1 sits between
    the recurrent layers, dropout2 between layer 2 and the dense head.
    L2 weight decay applies to the dense and output kernels only.
    """

    input_dim: int = 2048
    num_classes: int = 5
    rnn1_units: int = 256
    rnn2_units: int = 128
    bidirectional: bool = True
    dropout1: float = 0.5
    dropout2: float = 0.3
    dense_units: int = 64
    l2_lambda: float = 1e-4
    input_dropout: float = 0.0
    recurrent_dropout: float = 0.0

    def __post_init__(self):
        for name in ("input_dim", "num_classes", "rnn1_units", "rnn2_units", "dense_units"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("dropout1", "dropout2", "input_dropout", "recurrent_dropout"):
            rate = getattr(self, name)
            if not (0.0 <= rate < 1.0):
                raise ValueError(f"{name} must lie in [0, 1), got {rate}")
        if self.l2_lambda < 0.0:
            raise ValueError(f"l2_lambda must be >= 0, got {self.l2_lambda}")

    @property
    def directions(self) -> int:
        return 2 if self.bidirectional else 1

    @property
    def rnn1_out_dim(self) -> int:
        return self.rnn1_units * self.directions

    @property
    def context_dim(self) -> int:
        return self.rnn2_units * self.directions


PRESETS: dict[str, ArchConfig] = {
    # stacked bidirectional model, the reference configuration
    "bilstm": ArchConfig(),
    # unidirectional ablation with a narrower head
    "lstm-base": ArchConfig(bidirectional=False, dropout1=0.0, dropout2=0.4,
                            dense_units=32),
}


def preset(name: str, **overrides) -> ArchConfig:
    """Look up a named preset, optionally overriding individual fields."""
    if name not in PRESETS:
        raise ValueError(f"unknown architecture preset '{name}', "
                         f"choose from {sorted(PRESETS)}")
    base = PRESETS[name]
    return dataclasses.replace(base, **overrides) if overrides else base
