import math

import numpy as np
import pytest

from mipmot.geometry import (
    Box3D,
    bev_corners,
    bev_iou,
    center_distance,
    convex_polygon_intersection_area,
    corners_3d,
    diou_affinity,
    distance_term,
    enclosing_diagonal,
    iou_3d,
    polygon_area,
    wrap_angle,
)

SQRT2 = math.sqrt(2.0)


def random_box(rng, spread=5.0, min_size=0.5, max_size=4.0) -> Box3D:
    x, y, z = rng.uniform(-spread, spread, 3)
    l, w, h = rng.uniform(min_size, max_size, 3)
    return Box3D(x, y, z, l, w, h, rng.uniform(-math.pi, math.pi))


def rasterized_intersection(p, q, resolution=1e-3):
    """Grid-count oracle for the area of two polygons' intersection."""
    pts = np.vstack([p, q])
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    xs = np.arange(lo[0], hi[0], resolution) + resolution / 2
    ys = np.arange(lo[1], hi[1], resolution) + resolution / 2
    gx, gy = np.meshgrid(xs, ys)
    inside = np.ones(gx.shape, dtype=bool)
    for poly in (np.asarray(p), np.asarray(q)):
        for i in range(len(poly)):
            ax, ay = poly[i]
            bx, by = poly[(i + 1) % len(poly)]
            inside &= (bx - ax) * (gy - ay) - (by - ay) * (gx - ax) >= 0
    return inside.sum() * resolution * resolution


def monte_carlo_iou(b1: Box3D, b2: Box3D, rng, samples=100_000) -> float:
    """Volume-sampling oracle: sample inside b1, count hits inside b2."""
    local = rng.uniform(-0.5, 0.5, size=(samples, 3)) * np.array([b1.l, b1.w, b1.h])
    c, s = math.cos(b1.a), math.sin(b1.a)
    world = np.empty_like(local)
    world[:, 0] = c * local[:, 0] - s * local[:, 1] + b1.x
    world[:, 1] = s * local[:, 0] + c * local[:, 1] + b1.y
    world[:, 2] = local[:, 2] + b1.z
    # express in b2's frame
    dx = world[:, 0] - b2.x
    dy = world[:, 1] - b2.y
    c2, s2 = math.cos(b2.a), math.sin(b2.a)
    u = c2 * dx + s2 * dy
    v = -s2 * dx + c2 * dy
    hit = (
        (np.abs(u) <= 0.5 * b2.l)
        & (np.abs(v) <= 0.5 * b2.w)
        & (np.abs(world[:, 2] - b2.z) <= 0.5 * b2.h)
    )
    inter = b1.volume * hit.mean()
    union = b1.volume + b2.volume - inter
    return inter / union if union > 0 else 0.0


class TestBox3D:
    def test_heading_normalized(self):
        assert Box3D(0, 0, 0, 1, 1, 1, 3 * math.pi).a == pytest.approx(math.pi)
        assert Box3D(0, 0, 0, 1, 1, 1, -math.pi).a == pytest.approx(math.pi)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Box3D(math.nan, 0, 0, 1, 1, 1, 0)
        with pytest.raises(ValueError):
            Box3D(0, 0, 0, math.inf, 1, 1, 0)

    def test_rejects_negative_extent(self):
        with pytest.raises(ValueError):
            Box3D(0, 0, 0, -1, 1, 1, 0)

    def test_array_round_trip(self):
        box = Box3D(1, 2, 3, 4, 2, 1.5, 0.1)
        assert Box3D.from_array(box.to_array()) == box

    def test_wrap_angle_range(self):
        for a in np.linspace(-10, 10, 201):
            w = wrap_angle(a)
            assert -math.pi < w <= math.pi
            assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-12)


class TestBevCorners:
    def test_axis_aligned_unit_box(self):
        corners = {tuple(np.round(c, 9)) for c in bev_corners(Box3D(0, 0, 0, 1, 1, 1, 0))}
        assert corners == {(0.5, 0.5), (-0.5, 0.5), (-0.5, -0.5), (0.5, -0.5)}

    def test_quarter_turn_square_symmetry(self):
        a = {tuple(np.round(c, 9)) for c in bev_corners(Box3D(0, 0, 0, 1, 1, 1, 0))}
        b = {
            tuple(np.round(c, 9))
            for c in bev_corners(Box3D(0, 0, 0, 1, 1, 1, math.pi / 2))
        }
        assert a == b

    def test_shoelace_area_rotated(self):
        poly = bev_corners(Box3D(0, 0, 0, 2, 1, 1, math.pi / 4))
        assert polygon_area(poly) == pytest.approx(2.0, abs=1e-12)

    def test_area_equals_lw_random(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            box = random_box(rng)
            assert polygon_area(bev_corners(box)) == pytest.approx(
                box.l * box.w, abs=1e-9
            )


class TestPolygonIntersection:
    UNIT_SQUARE = [(0.5, 0.5), (-0.5, 0.5), (-0.5, -0.5), (0.5, -0.5)]

    def test_identity(self):
        assert convex_polygon_intersection_area(
            self.UNIT_SQUARE, self.UNIT_SQUARE
        ) == pytest.approx(1.0)

    def test_axis_aligned_offset(self):
        shifted = [(x + 0.5, y) for x, y in self.UNIT_SQUARE]
        assert convex_polygon_intersection_area(
            self.UNIT_SQUARE, shifted
        ) == pytest.approx(0.5)

    def test_rotated_square_against_raster_oracle(self):
        rotated = bev_corners(Box3D(0, 0, 0, 1, 1, 1, math.pi / 4))
        area = convex_polygon_intersection_area(self.UNIT_SQUARE, rotated)
        expected = 2.0 * (SQRT2 - 1.0)
        assert area == pytest.approx(expected, abs=1e-9)
        oracle = rasterized_intersection(self.UNIT_SQUARE, rotated)
        assert area == pytest.approx(oracle, abs=5e-3)

    def test_disjoint(self):
        far = [(x + 10, y) for x, y in self.UNIT_SQUARE]
        assert convex_polygon_intersection_area(self.UNIT_SQUARE, far) == 0.0

    def test_degenerate_returns_zero(self):
        line = [(0, 0), (1, 0), (2, 0)]
        assert convex_polygon_intersection_area(line, self.UNIT_SQUARE) == 0.0


class TestIou3d:
    def test_identity(self):
        box = Box3D(1, 2, 3, 2, 1, 1.5, 0.3)
        assert iou_3d(box, box) == pytest.approx(1.0)

    def test_axis_aligned_half_offset(self):
        a = Box3D(0, 0, 0, 1, 1, 1, 0)
        b = Box3D(0.5, 0, 0, 1, 1, 1, 0)
        assert iou_3d(a, b) == pytest.approx(1.0 / 3.0)
        rng = np.random.default_rng(5)
        assert monte_carlo_iou(a, b, rng) == pytest.approx(1.0 / 3.0, abs=5e-3)

    def test_disjoint(self):
        a = Box3D(0, 0, 0, 1, 1, 1, 0)
        b = Box3D(10, 0, 0, 1, 1, 1, 0)
        assert iou_3d(a, b) == 0.0

    def test_bounds_and_symmetry(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            a, b = random_box(rng), random_box(rng)
            v = iou_3d(a, b)
            assert 0.0 <= v <= 1.0
            assert v == pytest.approx(iou_3d(b, a), abs=1e-12)

    def test_rigid_transform_invariance(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            a, b = random_box(rng), random_box(rng)
            base = iou_3d(a, b)
            tx, ty, tz = rng.uniform(-20, 20, 3)
            theta = rng.uniform(-math.pi, math.pi)
            c, s = math.cos(theta), math.sin(theta)

            def move(box):
                x = c * box.x - s * box.y + tx
                y = s * box.x + c * box.y + ty
                return Box3D(x, y, box.z + tz, box.l, box.w, box.h, box.a + theta)

            assert iou_3d(move(a), move(b)) == pytest.approx(base, abs=1e-6)

    def test_monte_carlo_agreement(self):
        rng = np.random.default_rng(31)
        for _ in range(40):
            a = random_box(rng, spread=2.0)
            b = random_box(rng, spread=2.0)
            assert iou_3d(a, b) == pytest.approx(
                monte_carlo_iou(a, b, rng), abs=0.01
            )


class TestEnclosingDiagonal:
    def test_coincident_unit_cubes(self):
        box = Box3D(0, 0, 0, 1, 1, 1, 0)
        assert enclosing_diagonal(box, box) == pytest.approx(math.sqrt(3.0))

    def test_nine_meters_apart(self):
        a = Box3D(0, 0, 0, 1, 1, 1, 0)
        b = Box3D(9, 0, 0, 1, 1, 1, 0)
        assert enclosing_diagonal(a, b) == pytest.approx(math.sqrt(102.0))

    def test_corner_enumeration_oracle(self):
        rng = np.random.default_rng(41)
        for _ in range(50):
            a, b = random_box(rng), random_box(rng)
            pts = np.vstack([corners_3d(a), corners_3d(b)])
            expected = math.sqrt(
                sum((pts[:, i].max() - pts[:, i].min()) ** 2 for i in range(3))
            )
            assert enclosing_diagonal(a, b) == pytest.approx(expected, abs=1e-9)

    def test_degenerate_zero(self):
        z = Box3D(1, 1, 1, 0, 0, 0, 0)
        assert enclosing_diagonal(z, z) == 0.0


class TestDiouAffinity:
    def test_identity(self):
        box = Box3D(3, -2, 1, 4, 2, 1.5, 0.7)
        assert diou_affinity(box, box) == pytest.approx(2.0)

    def test_nine_meter_cubes(self):
        a = Box3D(0, 0, 0, 1, 1, 1, 0)
        b = Box3D(9, 0, 0, 1, 1, 1, 0)
        expected = 1.0 - 9.0 / math.sqrt(102.0)
        assert diou_affinity(a, b) == pytest.approx(expected, abs=1e-9)

    def test_symmetry_random(self):
        rng = np.random.default_rng(47)
        for _ in range(100):
            a, b = random_box(rng), random_box(rng)
            assert diou_affinity(a, b) == pytest.approx(diou_affinity(b, a), abs=1e-12)

    def test_bounds(self):
        rng = np.random.default_rng(53)
        for _ in range(200):
            a, b = random_box(rng, spread=15.0), random_box(rng, spread=15.0)
            assert 0.0 <= diou_affinity(a, b) <= 2.0

    def test_degenerate_coincident(self):
        z = Box3D(1, 1, 1, 0, 0, 0, 0)
        assert diou_affinity(z, z) == 2.0

    def test_distance_term_identity_iff_coincident(self):
        a = Box3D(0, 0, 0, 2, 1, 1, 0.2)
        assert distance_term(a, Box3D(0, 0, 0, 3, 2, 1, 1.0)) == pytest.approx(1.0)
        assert distance_term(a, Box3D(0.1, 0, 0, 2, 1, 1, 0.2)) < 1.0

    def test_distance_term_monotone_in_offset(self):
        a = Box3D(0, 0, 0, 2, 1, 1, 0)
        values = [distance_term(a, Box3D(d, 0, 0, 2, 1, 1, 0)) for d in np.linspace(0, 20, 30)]
        assert all(x >= y - 1e-12 for x, y in zip(values, values[1:]))


class TestBevIou:
    def test_identity_and_disjoint(self):
        a = Box3D(0, 0, 0, 2, 1, 1, 0.4)
        assert bev_iou(a, a) == pytest.approx(1.0)
        assert bev_iou(a, Box3D(50, 0, 0, 2, 1, 1, 0)) == 0.0

    def test_height_ignored(self):
        a = Box3D(0, 0, 0, 2, 1, 1, 0)
        b = Box3D(0, 0, 100, 2, 1, 5, 0)
        assert bev_iou(a, b) == pytest.approx(1.0)

    def test_center_distance(self):
        a = Box3D(0, 0, 0, 1, 1, 1, 0)
        b = Box3D(3, 4, 0, 1, 1, 1, 0)
        assert center_distance(a, b) == pytest.approx(5.0)
