"""Two-stage detection association and track lifecycle management.

Per frame, after every live track has been predicted forward:

1. confirmed and lost tracks compete for high-confidence detections
   (IoU-gated minimum-cost matching on 1 - IoU);
2. still-unmatched tracks that were tracked in the previous frame get a
   second chance against the low-confidence leftovers, under a tighter
   IoU gate;
3. tentative tracks (younger than min_hits_to_confirm) are matched only
   against the remaining high-confidence detections, and die immediately
   when unmatched;
4. unmatched confirmed tracks coast as lost for up to max_coast_frames,
   and fresh tracks spawn only from unmatched high-confidence detections.

Every detection-backed (frame, track) pair produces one log record,
including the spawn frame of a still-tentative track; confirmation
affects lifecycle only, not logging.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..data import BoundingBox, Detection, TrackRecord, iou
from ..kernels.assignment import solve_assignment
from .kalman import KalmanState, box_from_state, kalman_init, kalman_predict, kalman_update


class TrackStatus(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    LOST = "lost"
    REMOVED = "removed"


@dataclass(frozen=True)
class AssociationParams:
    high_conf_threshold: float = 0.6
    low_conf_threshold: float = 0.1
    iou_gate_stage1: float = 0.3
    iou_gate_stage2: float = 0.5
    max_coast_frames: int = 30
    min_hits_to_confirm: int = 3

    def __post_init__(self):
        if not (0.0 <= self.low_conf_threshold <= self.high_conf_threshold <= 1.0):
            raise ValueError("need 0 <= low_conf_threshold <= high_conf_threshold <= 1")
        if not (0.0 <= self.iou_gate_stage1 <= 1.0 and 0.0 <= self.iou_gate_stage2 <= 1.0):
            raise ValueError("IoU gates must lie in [0, 1]")
        if self.max_coast_frames < 0 or self.min_hits_to_confirm < 1:
            raise ValueError("max_coast_frames >= 0 and min_hits_to_confirm >= 1 required")


@dataclass
class ActiveTrack:
    track_id: int
    state: KalmanState
    status: TrackStatus
    hits: int = 1
    frames_since_update: int = 0
    last_confidence: float = 0.0

    @property
    def box(self) -> BoundingBox:
        return box_from_state(self.state)

    def predict(self) -> None:
        self.state = kalman_predict(self.state)

    def apply_match(self, detection: Detection, params: AssociationParams) -> None:
        self.state = kalman_update(self.state, detection)
        self.hits += 1
        self.frames_since_update = 0
        self.last_confidence = detection.confidence
        if self.status is TrackStatus.TENTATIVE:
            if self.hits >= params.min_hits_to_confirm:
                self.status = TrackStatus.CONFIRMED
        else:
            self.status = TrackStatus.CONFIRMED

    def mark_missed(self, params: AssociationParams) -> None:
        self.frames_since_update += 1
        if self.status is TrackStatus.TENTATIVE:
            self.status = TrackStatus.REMOVED
        elif self.frames_since_update > params.max_coast_frames:
            self.status = TrackStatus.REMOVED
        else:
            self.status = TrackStatus.LOST


@dataclass
class AssociationOutcome:
    matched: list[tuple[ActiveTrack, Detection]] = field(default_factory=list)
    spawn_candidates: list[Detection] = field(default_factory=list)
    removed: list[ActiveTrack] = field(default_factory=list)


def _gated_match(tracks: list[ActiveTrack], detections: list[Detection],
                 min_iou: float) -> tuple[list[tuple[int, int]], list[int], list[int]]:
    if not tracks or not detections:
        return [], list(range(len(tracks))), list(range(len(detections)))
    cost = np.empty((len(tracks), len(detections)))
    for ti, track in enumerate(tracks):
        tbox = track.box
        for di, det in enumerate(detections):
            overlap = iou(tbox, det.box)
            cost[ti, di] = 1.0 - overlap if overlap >= min_iou else np.inf
    pairs = solve_assignment(cost)
    matched_t = {t for t, _ in pairs}
    matched_d = {d for _, d in pairs}
    unmatched_t = [i for i in range(len(tracks)) if i not in matched_t]
    unmatched_d = [i for i in range(len(detections)) if i not in matched_d]
    return pairs, unmatched_t, unmatched_d


def associate_frame(tracks: list[ActiveTrack], detections: list[Detection],
                    params: AssociationParams) -> AssociationOutcome:
    """Match one frame of detections against predicted tracks.

    Mutates the given tracks (state updates, status transitions) and
    reports matches, detections that should seed new tracks, and tracks
    that crossed into REMOVED.
    """
    high = [d for d in detections if d.confidence >= params.high_conf_threshold]
    low = [d for d in detections
           if params.low_conf_threshold <= d.confidence < params.high_conf_threshold]

    pool = [t for t in tracks if t.status in (TrackStatus.CONFIRMED, TrackStatus.LOST)]
    tentative = [t for t in tracks if t.status is TrackStatus.TENTATIVE]

    outcome = AssociationOutcome()

    pairs, un_t, un_d = _gated_match(pool, high, params.iou_gate_stage1)
    for ti, di in pairs:
        pool[ti].apply_match(high[di], params)
        outcome.matched.append((pool[ti], high[di]))
    high_left = [high[i] for i in un_d]

    # second stage: only tracks seen in the previous frame chase low scores
    stage2_pool = [pool[i] for i in un_t if pool[i].status is TrackStatus.CONFIRMED]
    leftovers = [pool[i] for i in un_t if pool[i].status is not TrackStatus.CONFIRMED]
    pairs, un_t2, _ = _gated_match(stage2_pool, low, params.iou_gate_stage2)
    for ti, di in pairs:
        stage2_pool[ti].apply_match(low[di], params)
        outcome.matched.append((stage2_pool[ti], low[di]))
    leftovers.extend(stage2_pool[i] for i in un_t2)

    pairs, un_t3, un_d3 = _gated_match(tentative, high_left, params.iou_gate_stage1)
    for ti, di in pairs:
        tentative[ti].apply_match(high_left[di], params)
        outcome.matched.append((tentative[ti], high_left[di]))

    for track in leftovers + [tentative[i] for i in un_t3]:
        track.mark_missed(params)
        if track.status is TrackStatus.REMOVED:
            outcome.removed.append(track)

    outcome.spawn_candidates = [high_left[i] for i in un_d3]
    return outcome


def spawn_track(track_id: int, detection: Detection,
                params: AssociationParams) -> ActiveTrack:
    status = (TrackStatus.CONFIRMED if params.min_hits_to_confirm <= 1
              else TrackStatus.TENTATIVE)
    return ActiveTrack(track_id=track_id, state=kalman_init(detection),
                       status=status, hits=1, frames_since_update=0,
                       last_confidence=detection.confidence)


def track_video(detections_per_frame: list[list[Detection]],
                params: AssociationParams | None = None) -> list[TrackRecord]:
    """Run the tracker over a whole video and return its log records.

    Track ids start at 1 and increase in spawn order; records are sorted
    by (frame_index, track_id). The whole procedure is deterministic in
    its inputs.
    """
    params = params or AssociationParams()
    active: list[ActiveTrack] = []
    next_id = 1
    records: list[TrackRecord] = []

    for frame_index, detections in enumerate(detections_per_frame):
        for track in active:
            track.predict()
        outcome = associate_frame(active, detections, params)

        frame_records = []
        for track, det in outcome.matched:
            frame_records.append(TrackRecord(frame_index, track.track_id,
                                             track.box, det.confidence))
        for det in outcome.spawn_candidates:
            track = spawn_track(next_id, det, params)
            next_id += 1
            active.append(track)
            frame_records.append(TrackRecord(frame_index, track.track_id,
                                             track.box, det.confidence))
        frame_records.sort(key=lambda r: r.track_id)
        records.extend(frame_records)

        active = [t for t in active if t.status is not TrackStatus.REMOVED]

    return records
