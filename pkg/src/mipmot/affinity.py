"""Detection-to-track affinities.

Appearance scores come from absolute-subtraction correlation of
embeddings, normalized by a bidirectional softmax ranking; motion
scores come from the distance-IoU affinity between each detection box
and each track's predicted box. The two are fused as a weighted sum
with alpha + beta = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry
from .geometry import Box3D
from .motion import KalmanConfig, kf_predict


@dataclass(frozen=True)
class AffinityWeights:
    """Fusion weights; beta weighs motion 10x appearance by default."""

    alpha: float = 1.0 / 11.0
    beta: float = 10.0 / 11.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("weights must be nonnegative")
        if abs(self.alpha + self.beta - 1.0) > 1e-9:
            raise ValueError(f"alpha + beta must be 1, got {self.alpha + self.beta}")

    @classmethod
    def from_ratio(cls, beta_over_alpha: float) -> "AffinityWeights":
        """Weights with beta = r * alpha; r = 0 disables motion, inf-like
        ratios approach motion-only fusion."""
        if beta_over_alpha < 0:
            raise ValueError("ratio must be nonnegative")
        alpha = 1.0 / (1.0 + beta_over_alpha)
        return cls(alpha=alpha, beta=1.0 - alpha)

    @classmethod
    def motion_only(cls) -> "AffinityWeights":
        return cls(alpha=0.0, beta=1.0)


@dataclass
class AffinityMatrix:
    """Per-frame affinity components, detections as rows, tracks as columns.

    refined = alpha * appearance + beta * motion, with the weights that
    were actually applied (appearance may have been disabled).
    """

    appearance: np.ndarray
    motion: np.ndarray
    refined: np.ndarray
    det_indices: list[int]
    track_ids: list[int]
    alpha: float
    beta: float


def raw_appearance_score(e_d, e_k) -> float:
    """Similarity of two embeddings: negated mean absolute difference.

    0 for identical embeddings, decreasing with dissimilarity.
    """
    e_d = np.asarray(e_d, dtype=float)
    e_k = np.asarray(e_k, dtype=float)
    if e_d.shape != e_k.shape:
        raise ValueError(f"embedding shapes differ: {e_d.shape} vs {e_k.shape}")
    return float(-np.mean(np.abs(e_d - e_k)))


def raw_appearance_matrix(det_embeddings, track_embeddings) -> np.ndarray:
    """Pairwise raw appearance scores, M detections by N tracks."""
    d = np.asarray(det_embeddings, dtype=float)
    t = np.asarray(track_embeddings, dtype=float)
    if d.ndim != 2 or t.ndim != 2 or d.shape[1] != t.shape[1]:
        raise ValueError(f"incompatible embedding arrays: {d.shape} vs {t.shape}")
    return -np.mean(np.abs(d[:, None, :] - t[None, :, :]), axis=2)


def softmax_ranking(raw) -> np.ndarray:
    """Map raw scores to [0, 1] by averaging column- and row-softmaxes.

    P is the column-wise softmax (each column sums to 1), Q the
    row-wise softmax (each row sums to 1); the result is (P + Q) / 2.
    Invariant under adding a constant to every entry.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.size == 0:
        return raw.reshape(raw.shape).copy()
    if not np.all(np.isfinite(raw)):
        raise ValueError("raw scores contain non-finite values")
    col = np.exp(raw - raw.max(axis=0, keepdims=True))
    P = col / col.sum(axis=0, keepdims=True)
    row = np.exp(raw - raw.max(axis=1, keepdims=True))
    Q = row / row.sum(axis=1, keepdims=True)
    return 0.5 * (P + Q)


def _box_table(boxes: list[Box3D]):
    """Per-box quantities reused across all pairings."""
    n = len(boxes)
    centers = np.empty((n, 3))
    z_lo = np.empty(n)
    z_hi = np.empty(n)
    volumes = np.empty(n)
    radii = np.empty(n)
    aabb_min = np.empty((n, 3))
    aabb_max = np.empty((n, 3))
    polygons = []
    for i, b in enumerate(boxes):
        centers[i] = (b.x, b.y, b.z)
        z_lo[i] = b.z - 0.5 * b.h
        z_hi[i] = b.z + 0.5 * b.h
        volumes[i] = b.volume
        radii[i] = 0.5 * math.hypot(b.l, b.w)
        corners = geometry.bev_corners(b)
        polygons.append([tuple(v) for v in corners])
        aabb_min[i, :2] = corners.min(axis=0)
        aabb_max[i, :2] = corners.max(axis=0)
        aabb_min[i, 2] = z_lo[i]
        aabb_max[i, 2] = z_hi[i]
    return centers, z_lo, z_hi, volumes, radii, aabb_min, aabb_max, polygons


def motion_affinity_matrix(
    det_boxes: list[Box3D],
    predicted_boxes: list[Box3D],
    use_dis: bool = True,
    use_iou: bool = True,
) -> np.ndarray:
    """Pairwise motion affinities between detection and predicted boxes.

    With both terms enabled this is the distance-IoU affinity in
    [0, 2]; the flags exist for ablations. Equivalent to calling the
    scalar geometry functions per pair, but batched: the polygon clip
    only runs for pairs whose footprint circumcircles overlap.
    """
    if not (use_dis or use_iou):
        raise ValueError("at least one motion term must be enabled")
    m, n = len(det_boxes), len(predicted_boxes)
    if m == 0 or n == 0:
        return np.zeros((m, n))
    (d_ctr, d_lo, d_hi, d_vol, d_rad, d_min, d_max, d_poly) = _box_table(det_boxes)
    (t_ctr, t_lo, t_hi, t_vol, t_rad, t_min, t_max, t_poly) = _box_table(predicted_boxes)

    out = np.zeros((m, n))
    diff = d_ctr[:, None, :] - t_ctr[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    if use_dis:
        span = np.maximum(d_max[:, None, :], t_max[None, :, :]) - np.minimum(
            d_min[:, None, :], t_min[None, :, :]
        )
        diag = np.sqrt(np.sum(span * span, axis=2))
        degenerate = diag <= geometry.EPS
        safe = np.where(degenerate, 1.0, diag)
        out += np.where(degenerate, 1.0, np.maximum(0.0, 1.0 - dist / safe))
    if use_iou:
        dz = np.minimum(d_hi[:, None], t_hi[None, :]) - np.maximum(
            d_lo[:, None], t_lo[None, :]
        )
        dxy = np.sqrt(diff[:, :, 0] ** 2 + diff[:, :, 1] ** 2)
        candidates = (dz > 0.0) & (dxy <= d_rad[:, None] + t_rad[None, :])
        iou = np.zeros((m, n))
        for i, j in zip(*np.nonzero(candidates)):
            area = geometry.polygon_area(
                geometry._clip_polygon(d_poly[i], t_poly[j])
            )
            if area < geometry.EPS:
                continue
            inter = area * dz[i, j]
            union = d_vol[i] + t_vol[j] - inter
            if union > geometry.EPS:
                iou[i, j] = min(1.0, max(0.0, inter / union))
        out += iou
    return out


def compute_affinities(
    detections,
    tracks,
    weights: AffinityWeights,
    kalman_cfg: KalmanConfig | None = None,
    raw_appearance: np.ndarray | None = None,
    use_dis: bool = True,
    use_iou: bool = True,
) -> AffinityMatrix:
    """Build the refined affinity matrix for one frame.

    Tracks carry either a ``predicted_box`` for the current frame or a
    Kalman state to predict from (``kalman_cfg`` required then); each
    track is predicted once. Appearance uses ``raw_appearance`` when
    given, else the embeddings carried by detections and tracks; if any
    participant lacks an embedding, appearance is disabled for the
    frame (alpha = 0, beta = 1).
    """
    m, n = len(detections), len(tracks)
    if m == 0 or n == 0:
        empty = np.zeros((m, n))
        return AffinityMatrix(
            appearance=empty.copy(),
            motion=empty.copy(),
            refined=empty.copy(),
            det_indices=list(range(m)),
            track_ids=[t.id for t in tracks],
            alpha=weights.alpha,
            beta=weights.beta,
        )

    predicted = []
    for t in tracks:
        box = getattr(t, "predicted_box", None)
        if box is None:
            if kalman_cfg is None:
                raise ValueError("track has no predicted box and no kalman_cfg given")
            _, box = kf_predict(t.state, kalman_cfg)
        predicted.append(box)

    motion = motion_affinity_matrix(
        [d.box for d in detections], predicted, use_dis=use_dis, use_iou=use_iou
    )

    if raw_appearance is not None:
        raw = np.asarray(raw_appearance, dtype=float)
        if raw.shape != (m, n):
            raise ValueError(f"raw appearance must be {m}x{n}, got {raw.shape}")
    else:
        det_embs = [d.embedding for d in detections]
        trk_embs = [t.embedding for t in tracks]
        if any(e is None for e in det_embs) or any(e is None for e in trk_embs):
            raw = None
        else:
            raw = raw_appearance_matrix(det_embs, trk_embs)

    if raw is None or weights.alpha == 0.0:
        appearance = np.zeros((m, n))
        alpha, beta = 0.0, 1.0
    else:
        appearance = softmax_ranking(raw)
        alpha, beta = weights.alpha, weights.beta

    refined = alpha * appearance + beta * motion
    return AffinityMatrix(
        appearance=appearance,
        motion=motion,
        refined=refined,
        det_indices=list(range(m)),
        track_ids=[t.id for t in tracks],
        alpha=alpha,
        beta=beta,
    )
