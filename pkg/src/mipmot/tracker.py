"""Online per-sequence tracking pipeline.

Each frame: filter detections by classification confidence, predict
every track one frame ahead, compute detection-track affinities, run
the association solver, update matched Kalman states and apply the
lifecycle rules. There is no incubation period: a detection selected
as a start becomes a confirmed track immediately, while detections the
solver leaves unselected enter as tentative tracks with one miss
already counted. Tracks coast on prediction while missed and are
dropped once their consecutive misses exceed the miss threshold.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .affinity import AffinityWeights, compute_affinities
from .association import (
    AssociationProblem,
    AssociationResult,
    hungarian_baseline,
    solve_mip,
)
from .geometry import Box3D
from .io_formats import Detection
from .motion import KalmanConfig, KalmanState, kf_init, kf_predict, kf_update


class TrackStatus(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"


@dataclass
class Track:
    """One persistent object hypothesis."""

    id: int
    state: KalmanState
    last_box: Box3D
    embedding: Optional[np.ndarray]
    confidence: float
    hits: int
    misses: int
    status: TrackStatus
    predicted_box: Optional[Box3D] = None


@dataclass
class FrameResult:
    """Confirmed, currently-associated tracks of one frame."""

    frame: int
    tracks: list[tuple[int, Box3D, float]]


@dataclass
class TrackerConfig:
    theta_cls: float = 0.85
    theta_hit: int = 0
    theta_miss: int = 2
    default_start_prob: float = 0.5
    default_end_prob: float = 0.5
    weights: AffinityWeights = field(default_factory=AffinityWeights)
    use_dis: bool = True
    use_iou: bool = True
    w_cls: float = 100.0
    w_aff: float = 22.0
    w_se: float = 1.0
    associator: str = "mip"  # "mip" | "hungarian"
    ha_gate: Optional[float] = None
    # 0 carries the last associated detection confidence; > 0 blends it
    # with the track's previous confidence (exponential smoothing).
    confidence_smoothing: float = 0.0
    kalman: KalmanConfig = field(default_factory=KalmanConfig)

    def __post_init__(self):
        if self.associator not in ("mip", "hungarian"):
            raise ValueError(f"unknown associator: {self.associator!r}")
        if not 0.0 <= self.theta_cls <= 1.0:
            raise ValueError("theta_cls must be in [0, 1]")
        if not 0.0 <= self.confidence_smoothing < 1.0:
            raise ValueError("confidence_smoothing must be in [0, 1)")
        if self.theta_hit < 0 or self.theta_miss < 0:
            raise ValueError("thresholds must be nonnegative")


class Tracker:
    """Single-sequence online tracker. Frames must arrive in order."""

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config or TrackerConfig()
        self.tracks: list[Track] = []
        self._next_id = 1
        self._last_frame: Optional[int] = None

    def _new_track(self, det: Detection, status: TrackStatus, misses: int) -> Track:
        track = Track(
            id=self._next_id,
            state=kf_init(det.box, self.config.kalman),
            last_box=det.box,
            embedding=det.embedding,
            confidence=det.score,
            hits=1 if status is TrackStatus.CONFIRMED else 0,
            misses=misses,
            status=status,
        )
        self._next_id += 1
        return track

    def _associate(self, detections: list[Detection]) -> AssociationResult:
        cfg = self.config
        aff = compute_affinities(
            detections,
            self.tracks,
            cfg.weights,
            kalman_cfg=cfg.kalman,
            use_dis=cfg.use_dis,
            use_iou=cfg.use_iou,
        )
        m, n = aff.refined.shape
        if cfg.associator == "hungarian":
            # The baseline trusts all inputs: matched pairs keep ids,
            # everything left over starts or ends unconditionally.
            pairs = hungarian_baseline(aff.refined, gate=cfg.ha_gate)
            y_aff = np.zeros((m, n), dtype=int)
            for d, k in pairs:
                y_aff[d, k] = 1
            y_se_det = (y_aff.sum(axis=1) == 0).astype(int)
            y_se_trk = (y_aff.sum(axis=0) == 0).astype(int)
            return AssociationResult(
                y_cls_det=np.ones(m, dtype=int),
                y_cls_trk=np.ones(n, dtype=int),
                y_aff=y_aff,
                y_se_det=y_se_det,
                y_se_trk=y_se_trk,
                objective=0.0,
            )
        problem = AssociationProblem(
            x_cls_det=np.array([d.score for d in detections]),
            x_cls_trk=np.array([t.confidence for t in self.tracks]),
            x_aff=aff.refined,
            x_se_det=np.array(
                [
                    d.start_prob if d.start_prob is not None else cfg.default_start_prob
                    for d in detections
                ]
            ),
            x_se_trk=np.full(n, cfg.default_end_prob),
            w_cls=cfg.w_cls,
            w_aff=cfg.w_aff,
            w_se=cfg.w_se,
        )
        return solve_mip(problem)

    def step(self, frame: int, detections: list[Detection]) -> FrameResult:
        """Process one frame and return its confirmed associated tracks."""
        cfg = self.config
        if self._last_frame is not None and frame <= self._last_frame:
            raise ValueError(
                f"frames must be strictly increasing: got {frame} after {self._last_frame}"
            )
        self._last_frame = frame

        detections = [d for d in detections if d.score >= cfg.theta_cls]

        for track in self.tracks:
            track.state, track.predicted_box = kf_predict(track.state, cfg.kalman)

        assoc = self._associate(detections)

        emitted: list[Track] = []
        matched_tracks = set()
        for d, k in assoc.matches:
            det = detections[d]
            track = self.tracks[k]
            matched_tracks.add(k)
            track.state = kf_update(track.state, det.box.to_array(), cfg.kalman)
            track.last_box = track.state.box()
            g = cfg.confidence_smoothing
            track.confidence = g * track.confidence + (1.0 - g) * det.score
            if det.embedding is not None:
                track.embedding = det.embedding
            track.hits += 1
            track.misses = 0
            if track.status is TrackStatus.TENTATIVE and track.hits > cfg.theta_hit:
                track.status = TrackStatus.CONFIRMED
            if track.status is TrackStatus.CONFIRMED:
                emitted.append(track)

        # Coasting tracks keep their predicted state and accrue a miss;
        # an end decision is soft so a wrongly ended track can recover.
        for k, track in enumerate(self.tracks):
            if k not in matched_tracks:
                track.misses += 1
                track.hits = 0
                track.last_box = track.predicted_box

        matched_dets = {d for d, _ in assoc.matches}
        for d, det in enumerate(detections):
            if d in matched_dets:
                continue
            if assoc.y_se_det[d]:
                track = self._new_track(det, TrackStatus.CONFIRMED, misses=0)
                self.tracks.append(track)
                emitted.append(track)
        for d, det in enumerate(detections):
            if d not in matched_dets and not assoc.y_se_det[d]:
                self.tracks.append(self._new_track(det, TrackStatus.TENTATIVE, misses=1))

        self.tracks = [t for t in self.tracks if t.misses <= cfg.theta_miss]

        emitted.sort(key=lambda t: t.id)
        return FrameResult(
            frame=frame,
            tracks=[(t.id, t.last_box, t.confidence) for t in emitted],
        )


def run_sequence(
    detections_by_frame: dict[int, list[Detection]],
    config: TrackerConfig | None = None,
    num_frames: int | None = None,
) -> list[FrameResult]:
    """Track a whole sequence; frames absent from the input are empty.

    Frames run from 0 through the last frame present (or num_frames).
    """
    tracker = Tracker(config)
    if num_frames is None:
        num_frames = (max(detections_by_frame) + 1) if detections_by_frame else 0
    return [
        tracker.step(frame, detections_by_frame.get(frame, []))
        for frame in range(num_frames)
    ]
