"""Adam optimiser with bias correction.

Moment tensors mirror the parameter tensors by name and dtype. The
epsilon sits outside the square root in the denominator, and the
per-step bias correction uses the running step count, so the first
update has the full learning-rate magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ModelParams


@dataclass
class AdamState:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")

    @classmethod
    def init_like(cls, params: ModelParams, learning_rate: float = 1e-4,
                  **kwargs) -> "AdamState":
        state = cls(learning_rate=learning_rate, **kwargs)
        for name, arr in params.named_arrays():
            state.m[name] = np.zeros_like(arr)
            state.v[name] = np.zeros_like(arr)
        return state


def adam_step(params: ModelParams, grads: dict[str, np.ndarray],
              state: AdamState) -> None:
    """Apply one in-place update. Zero gradients leave parameters alone."""
    state.step += 1
    t = state.step
    b1 = state.beta1
    b2 = state.beta2
    bias1 = 1.0 - b1 ** t
    bias2 = 1.0 - b2 ** t
    for name, arr in params.named_arrays():
        if name not in grads:
            raise KeyError(f"missing gradient for parameter '{name}'")
        g = np.asarray(grads[name], dtype=arr.dtype)
        if g.shape != arr.shape:
            raise ValueError(f"gradient shape {g.shape} does not match "
                             f"parameter '{name}' shape {arr.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / arr.dtype.type(bias1)
        v_hat = v / arr.dtype.type(bias2)
        arr -= arr.dtype.type(state.learning_rate) * m_hat / (np.sqrt(v_hat)
                                                              + arr.dtype.type(state.epsilon))
