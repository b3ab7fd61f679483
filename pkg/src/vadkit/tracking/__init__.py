"""Identity-aware multi-object tracking."""

from .kalman import KalmanState, kalman_init, kalman_predict, kalman_update, box_from_state
from .tracker import (AssociationParams, TrackStatus, ActiveTrack,
                      associate_frame, track_video)

__all__ = [
    "KalmanState", "kalman_init", "kalman_predict", "kalman_update",
    "box_from_state", "AssociationParams", "TrackStatus", "ActiveTrack",
    "associate_frame", "track_video",
]
