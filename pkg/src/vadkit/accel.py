"""Kernel acceleration switch.

Hot loops ship in two variants: a numba-jitted loop kernel and a pure
numpy fallback. The environment variable VADKIT_DISABLE_NUMBA picks the
fallback at import time, so deployments without a working compiler (or
benchmark runs that want the baseline) never touch numba.
"""

from __future__ import annotations

import os


def _env_disabled() -> bool:
    value = os.environ.get("VADKIT_DISABLE_NUMBA", "").strip().lower()
    return value not in ("", "0", "false", "no", "off")


NUMBA_ENABLED = not _env_disabled()

if NUMBA_ENABLED:
    try:
        import numba as _numba
    except ImportError:  # pragma: no cover - numba is a hard dep, belt and braces
        _numba = None
        NUMBA_ENABLED = False
else:
    _numba = None


def maybe_njit(**options):
    """Return numba.njit(**options) when acceleration is on, else identity."""

    def decorate(fn):
        if NUMBA_ENABLED and _numba is not None:
            return _numba.njit(**options)(fn)
        return fn

    return decorate


def warmup() -> None:
    """Trigger jit compilation of every hot kernel on tiny inputs.

    Call once before timing anything; first-call compilation would otherwise
    dominate small workloads.
    """
    import numpy as np

    from .kernels import assignment, lstm, resize, sepconv

    img = np.arange(60.0, dtype=np.float64).reshape(4, 5, 3)
    sepconv.separable_convolve(img, np.array([0.25, 0.5, 0.25]))
    resize.bilinear_resize(img, 3, 7)
    assignment.solve_assignment(np.array([[1.0, 2.0], [2.0, 1.0]]))
    for dtype in (np.float32, np.float64):
        x = np.linspace(-1.0, 1.0, 12, dtype=dtype).reshape(3, 4)
        w = np.ones((8, 4), dtype=dtype) * dtype(0.1)
        u = np.ones((8, 2), dtype=dtype) * dtype(0.1)
        b = np.zeros(8, dtype=dtype)
        ones_in = np.ones(4, dtype=dtype)
        ones_rec = np.ones(2, dtype=dtype)
        h_seq, c_seq, gates = lstm.lstm_forward(x, w, u, b, ones_in, ones_rec)
        lstm.lstm_backward(x, w, u, ones_in, ones_rec, h_seq, c_seq, gates,
                           np.ones_like(h_seq))
