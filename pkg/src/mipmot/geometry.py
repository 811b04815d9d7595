"""Oriented 3D box geometry.

Boxes are upright cuboids: an (x, y, z) center, (l, w, h) extents and a
heading angle about the vertical (z) axis. Overlap is computed as a
rotated-rectangle intersection in the ground plane (bird's-eye view)
times the vertical interval overlap, which is exact for upright boxes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Areas / volumes below this are treated as degenerate.
EPS = 1e-9

_TAU = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    a = a % _TAU
    if a > math.pi:
        a -= _TAU
    return a


@dataclass(frozen=True)
class Box3D:
    """Oriented 3D bounding box in a right-handed world frame.

    l is the extent along the heading direction, w the lateral extent,
    h the vertical extent. The heading a is stored wrapped to (-pi, pi].
    """

    x: float
    y: float
    z: float
    l: float
    w: float
    h: float
    a: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "z", "l", "w", "h", "a"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"Box3D field {name} is not finite: {v!r}")
        if self.l < 0 or self.w < 0 or self.h < 0:
            raise ValueError(
                f"Box3D extents must be nonnegative, got l={self.l} w={self.w} h={self.h}"
            )
        object.__setattr__(self, "a", wrap_angle(self.a))

    @property
    def center(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @property
    def volume(self) -> float:
        return self.l * self.w * self.h

    def to_array(self) -> np.ndarray:
        """Return the (x, y, z, l, w, h, a) 7-vector."""
        return np.array(
            [self.x, self.y, self.z, self.l, self.w, self.h, self.a], dtype=float
        )

    @classmethod
    def from_array(cls, v) -> "Box3D":
        v = np.asarray(v, dtype=float)
        if v.shape != (7,):
            raise ValueError(f"expected a 7-vector, got shape {v.shape}")
        return cls(*v.tolist())


def bev_corners(box: Box3D) -> np.ndarray:
    """Ground-plane footprint of a box as a (4, 2) array, counter-clockwise.

    The polygon area equals l * w.
    """
    hl, hw = 0.5 * box.l, 0.5 * box.w
    c, s = math.cos(box.a), math.sin(box.a)
    # CCW in the local frame: (+,+), (-,+), (-,-), (+,-)
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([box.x, box.y])


def corners_3d(box: Box3D) -> np.ndarray:
    """All 8 corners of a box as an (8, 3) array (bottom face then top face)."""
    bev = bev_corners(box)
    zs = np.array([box.z - 0.5 * box.h, box.z + 0.5 * box.h])
    out = np.empty((8, 3))
    out[:4, :2] = bev
    out[:4, 2] = zs[0]
    out[4:, :2] = bev
    out[4:, 2] = zs[1]
    return out


def polygon_area(poly) -> float:
    """Shoelace area of a counter-clockwise polygon given as (n, 2) points."""
    pts = [(float(p[0]), float(p[1])) for p in poly]
    n = len(pts)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        acc += x1 * y2 - x2 * y1
    return 0.5 * acc


def _clip_polygon(subject, clipper):
    """Sutherland-Hodgman clip of `subject` by convex CCW `clipper`.

    Both polygons are lists of (x, y) tuples; the result is the CCW
    intersection polygon (possibly empty).
    """
    output = subject
    n = len(clipper)
    for i in range(n):
        if not output:
            return []
        ax, ay = clipper[i]
        bx, by = clipper[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        points, output = output, []
        prev_x, prev_y = points[-1]
        prev_in = ex * (prev_y - ay) - ey * (prev_x - ax) >= 0.0
        for cur_x, cur_y in points:
            cur_in = ex * (cur_y - ay) - ey * (cur_x - ax) >= 0.0
            if cur_in != prev_in:
                # Edge crossing: intersect (prev, cur) with the clip line.
                dx, dy = cur_x - prev_x, cur_y - prev_y
                denom = ex * dy - ey * dx
                if denom != 0.0:
                    t = (ex * (ay - prev_y) - ey * (ax - prev_x)) / denom
                    output.append((prev_x + t * dx, prev_y + t * dy))
            if cur_in:
                output.append((cur_x, cur_y))
            prev_x, prev_y, prev_in = cur_x, cur_y, cur_in
    return output


def convex_polygon_intersection_area(p, q) -> float:
    """Area of the intersection of two convex CCW polygons.

    Degenerate inputs or results (area below EPS) count as zero.
    """
    p = [(float(v[0]), float(v[1])) for v in p]
    q = [(float(v[0]), float(v[1])) for v in q]
    if polygon_area(p) < EPS or polygon_area(q) < EPS:
        return 0.0
    area = polygon_area(_clip_polygon(p, q))
    return area if area >= EPS else 0.0


def _bev_radius(box: Box3D) -> float:
    return 0.5 * math.hypot(box.l, box.w)


def _bev_intersection_area(b1: Box3D, b2: Box3D) -> float:
    dx, dy = b2.x - b1.x, b2.y - b1.y
    r = _bev_radius(b1) + _bev_radius(b2)
    if dx * dx + dy * dy > r * r:
        return 0.0
    p = [tuple(v) for v in bev_corners(b1)]
    q = [tuple(v) for v in bev_corners(b2)]
    area = polygon_area(_clip_polygon(p, q))
    return area if area >= EPS else 0.0


def _z_overlap(b1: Box3D, b2: Box3D) -> float:
    lo = max(b1.z - 0.5 * b1.h, b2.z - 0.5 * b2.h)
    hi = min(b1.z + 0.5 * b1.h, b2.z + 0.5 * b2.h)
    return max(0.0, hi - lo)


def intersection_volume(b1: Box3D, b2: Box3D) -> float:
    dz = _z_overlap(b1, b2)
    if dz <= 0.0:
        return 0.0
    return _bev_intersection_area(b1, b2) * dz


def iou_3d(b1: Box3D, b2: Box3D) -> float:
    """3D intersection-over-union of two oriented boxes, in [0, 1]."""
    inter = intersection_volume(b1, b2)
    union = b1.volume + b2.volume - inter
    if union <= EPS:
        return 0.0
    return min(1.0, max(0.0, inter / union))


def bev_iou(b1: Box3D, b2: Box3D) -> float:
    """Ground-plane rotated-rectangle IoU of two boxes, in [0, 1]."""
    inter = _bev_intersection_area(b1, b2)
    union = b1.l * b1.w + b2.l * b2.w - inter
    if union <= EPS:
        return 0.0
    return min(1.0, max(0.0, inter / union))


def enclosing_diagonal(b1: Box3D, b2: Box3D) -> float:
    """Diagonal of the smallest axis-aligned box covering both boxes."""
    corners = np.vstack((corners_3d(b1), corners_3d(b2)))
    extent = corners.max(axis=0) - corners.min(axis=0)
    return float(np.linalg.norm(extent))


def center_distance(b1: Box3D, b2: Box3D) -> float:
    return math.sqrt(
        (b1.x - b2.x) ** 2 + (b1.y - b2.y) ** 2 + (b1.z - b2.z) ** 2
    )


def distance_term(b1: Box3D, b2: Box3D) -> float:
    """Normalized-center-distance score in [0, 1].

    1 - dist(centers) / enclosing_diagonal; 1 when the centers coincide.
    Both centers lie inside the enclosing box, so the ratio never
    exceeds 1. Coincident degenerate boxes (zero diagonal) score 1.
    """
    diag = enclosing_diagonal(b1, b2)
    if diag <= EPS:
        return 1.0
    return max(0.0, 1.0 - center_distance(b1, b2) / diag)


def diou_affinity(b1: Box3D, b2: Box3D) -> float:
    """Distance-IoU affinity in [0, 2]: distance term plus 3D IoU.

    The distance term keeps the affinity informative when the boxes do
    not overlap at all. Identical boxes score exactly 2, including the
    degenerate case of two zero-size boxes at the same point.
    """
    if enclosing_diagonal(b1, b2) <= EPS:
        return 2.0
    return distance_term(b1, b2) + iou_3d(b1, b2)
