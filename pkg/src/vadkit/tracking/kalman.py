"""Constant-velocity Kalman filter over box geometry.

State vector (8,): center x, center y, aspect ratio w/h, height, and the
velocity of each. Process and measurement noise scale with the current
box height, so the filter adapts to apparent person size without tuning
per camera. Covariances are re-symmetrised after every step; an
innovation covariance that loses positive definiteness raises
NumericsError instead of silently producing garbage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import BoundingBox, Detection

STATE_DIM = 8

# noise scale relative to box height
_STD_POSITION = 1.0 / 20.0
_STD_VELOCITY = 1.0 / 160.0

_MOTION_MAT = np.eye(STATE_DIM)
for _i in range(4):
    _MOTION_MAT[_i, 4 + _i] = 1.0
_UPDATE_MAT = np.eye(4, STATE_DIM)


class NumericsError(ArithmeticError):
    """Raised when filter algebra degenerates numerically."""


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray        # (8,)
    covariance: np.ndarray  # (8, 8)

    def __post_init__(self):
        if self.mean.shape != (STATE_DIM,) or self.covariance.shape != (STATE_DIM, STATE_DIM):
            raise ValueError("state must be an 8-vector with an 8x8 covariance")
        if not self.mean[3] > 0:
            raise ValueError(f"state height must stay positive, got {self.mean[3]}")


def _measurement(box: BoundingBox) -> np.ndarray:
    cx, cy = box.center
    return np.array([cx, cy, box.w / box.h, box.h], dtype=np.float64)


def box_from_state(state: KalmanState) -> BoundingBox:
    cx, cy, aspect, h = state.mean[:4]
    w = aspect * h
    return BoundingBox(cx - w / 2.0, cy - h / 2.0, w, h)


def kalman_init(detection: Detection) -> KalmanState:
    """Initialise a state from a first detection with zero velocity."""
    z = _measurement(detection.box)
    mean = np.zeros(STATE_DIM)
    mean[:4] = z
    h = z[3]
    std = np.array([
        2 * _STD_POSITION * h, 2 * _STD_POSITION * h, 1e-2, 2 * _STD_POSITION * h,
        10 * _STD_VELOCITY * h, 10 * _STD_VELOCITY * h, 1e-5, 10 * _STD_VELOCITY * h,
    ])
    return KalmanState(mean, np.diag(std ** 2))


def kalman_predict(state: KalmanState) -> KalmanState:
    """Advance one frame under the constant-velocity model."""
    h = state.mean[3]
    std = np.array([
        _STD_POSITION * h, _STD_POSITION * h, 1e-2, _STD_POSITION * h,
        _STD_VELOCITY * h, _STD_VELOCITY * h, 1e-5, _STD_VELOCITY * h,
    ])
    process_cov = np.diag(std ** 2)
    mean = _MOTION_MAT @ state.mean
    cov = _MOTION_MAT @ state.covariance @ _MOTION_MAT.T + process_cov
    cov = (cov + cov.T) / 2.0
    return KalmanState(mean, cov)


def kalman_update(state: KalmanState, detection: Detection) -> KalmanState:
    """Fold one measurement into a predicted state.

    The posterior covariance is P - K S K^T, which never increases the
    trace; the gain comes from a Cholesky solve of the innovation
    covariance S.
    """
    h = state.mean[3]
    std = np.array([_STD_POSITION * h, _STD_POSITION * h, 1e-1, _STD_POSITION * h])
    meas_cov = np.diag(std ** 2)

    projected_mean = _UPDATE_MAT @ state.mean
    projected_cov = _UPDATE_MAT @ state.covariance @ _UPDATE_MAT.T + meas_cov

    try:
        chol = np.linalg.cholesky(projected_cov)
    except np.linalg.LinAlgError as exc:
        raise NumericsError("innovation covariance is not positive definite") from exc
    # gain K = P H^T S^{-1} via two triangular solves
    pht = state.covariance @ _UPDATE_MAT.T
    tmp = np.linalg.solve(chol, pht.T)
    gain = np.linalg.solve(chol.T, tmp).T

    innovation = _measurement(detection.box) - projected_mean
    mean = state.mean + gain @ innovation
    cov = state.covariance - gain @ projected_cov @ gain.T
    cov = (cov + cov.T) / 2.0
    return KalmanState(mean, cov)
