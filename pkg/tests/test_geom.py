"""Convex ground-plane geometry against independent oracles.

Intersection areas are checked against Monte-Carlo rejection sampling and
dilation areas against the closed form A + P·r + πr²; neither oracle calls
back into the code under test.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scenelayout.geom import (
    DISK_SEGMENTS,
    ConvexPolygon,
    bounding_circle,
    centroid,
    closest_point_on_polygon,
    contains_point,
    convex_hull,
    dilate,
    disk_polygon,
    distance_to_polygon,
    footprint,
    intersection_area,
    minimal_translation,
    minkowski_sum,
    perimeter,
    polygon_area,
    sat_overlap,
    separation,
)

from .conftest import (
    box,
    mc_intersection_area,
    oriented_box_corners,
    random_convex_polygon,
    sat_boxes_overlap,
)


def square(side: float, cx: float = 0.0, cz: float = 0.0) -> ConvexPolygon:
    h = side / 2.0
    return convex_hull([(cx - h, cz - h), (cx + h, cz - h), (cx + h, cz + h), (cx - h, cz + h)])


def poly_strategy(seed_label: str) -> st.SearchStrategy[ConvexPolygon]:
    return st.integers(0, 10_000).map(
        lambda k: random_convex_polygon(np.random.default_rng((hash(seed_label) % 2**32, k)))
    )


class TestHull:
    def test_square_plus_center(self) -> None:
        hull = convex_hull([(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0.5)])
        assert len(hull.vertices) == 4
        assert polygon_area(hull) == pytest.approx(1.0)

    def test_triangle(self) -> None:
        hull = convex_hull([(0, 0), (1, 0), (0, 1)])
        assert len(hull.vertices) == 3
        assert polygon_area(hull) == pytest.approx(0.5)

    def test_collinear_points_collapse(self) -> None:
        hull = convex_hull([(0, 0), (1, 1), (2, 2), (3, 3)])
        assert hull.is_degenerate
        assert set(hull.vertices) == {(0.0, 0.0), (3.0, 3.0)}

    def test_all_coincident_degenerates(self) -> None:
        hull = convex_hull([(2, 2), (2, 2), (2, 2)])
        assert hull.is_degenerate
        assert hull.vertices == ((2.0, 2.0),)

    def test_no_points_rejected(self) -> None:
        with pytest.raises(ValueError):
            convex_hull([])

    def test_random_disk_points_bounded_by_disk(self) -> None:
        rng = np.random.default_rng(7)
        r = np.sqrt(rng.uniform(0, 1, 1000))
        t = rng.uniform(0, 2 * math.pi, 1000)
        hull = convex_hull(zip((r * np.cos(t)).tolist(), (r * np.sin(t)).tolist()))
        assert polygon_area(hull) <= math.pi
        assert polygon_area(hull) > 2.5  # 1000 samples hug the unit circle

    def test_ccw_orientation(self) -> None:
        rng = np.random.default_rng(11)
        for _ in range(20):
            p = random_convex_polygon(rng)
            verts = p.vertices
            for a, b, c in zip(verts, verts[1:] + verts[:1], verts[2:] + verts[:2]):
                cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
                assert cross > 0.0


class TestAreaAndContainment:
    def test_unit_square_area(self) -> None:
        assert polygon_area(square(1.0)) == pytest.approx(1.0)

    def test_regular_64gon_closed_form(self) -> None:
        gon = disk_polygon(1.0)
        want = (DISK_SEGMENTS / 2.0) * math.sin(2.0 * math.pi / DISK_SEGMENTS)
        assert polygon_area(gon) == pytest.approx(want, rel=1e-12)
        assert want == pytest.approx(math.pi, rel=2e-3)

    def test_contains_point(self) -> None:
        p = square(2.0)
        assert contains_point(p, (0.0, 0.0))
        assert contains_point(p, (1.0, 1.0))  # corner counts, tolerance 1e-9
        assert not contains_point(p, (1.1, 0.0))

    def test_distance_and_closest_point(self) -> None:
        p = square(2.0)
        assert distance_to_polygon(p, (0.0, 0.0)) == 0.0
        assert distance_to_polygon(p, (3.0, 0.0)) == pytest.approx(2.0)
        assert closest_point_on_polygon(p, (3.0, 0.0)) == pytest.approx((1.0, 0.0))
        assert distance_to_polygon(p, (2.0, 2.0)) == pytest.approx(math.sqrt(2.0))

    def test_centroid_of_square(self) -> None:
        assert centroid(square(2.0, cx=3.0, cz=-1.0)) == pytest.approx((3.0, -1.0))

    def test_bounding_circle_covers_vertices(self) -> None:
        rng = np.random.default_rng(3)
        for _ in range(25):
            p = random_convex_polygon(rng)
            (cx, cz), r = bounding_circle(p)
            for x, z in p.vertices:
                assert math.hypot(x - cx, z - cz) <= r + 1e-9


class TestMinkowskiAndDilation:
    def test_square_plus_square(self) -> None:
        s = minkowski_sum(square(1.0), square(1.0))
        assert polygon_area(s) == pytest.approx(4.0)

    def test_sum_with_singleton_translates(self) -> None:
        p = square(1.0)
        t = ConvexPolygon(((2.0, 3.0),))
        s = minkowski_sum(p, t)
        assert polygon_area(s) == pytest.approx(1.0)
        assert centroid(s) == pytest.approx((2.0, 3.0))

    def test_vertex_count_bound(self) -> None:
        rng = np.random.default_rng(5)
        for _ in range(20):
            p = random_convex_polygon(rng)
            q = random_convex_polygon(rng)
            s = minkowski_sum(p, q)
            assert len(s.vertices) <= len(p.vertices) + len(q.vertices)

    def test_unit_square_dilated_quarter(self) -> None:
        s = minkowski_sum(square(1.0), disk_polygon(0.25))
        want = 1.0 + 4.0 * 0.25 + math.pi * 0.25**2
        assert polygon_area(s) == pytest.approx(want, rel=5e-3)

    def test_dilate_zero_is_identity(self) -> None:
        p = square(1.0)
        assert dilate(p, 0.0) is p

    def test_dilate_point_gives_disk(self) -> None:
        p = ConvexPolygon(((1.0, 1.0),))
        d = dilate(p, 0.5)
        assert polygon_area(d) == pytest.approx(math.pi * 0.25, rel=5e-3)

    def test_dilation_area_law(self) -> None:
        # Lower bound 0.99·πr² needs perimeter ≲ 20·r, hence the small hulls.
        rng = np.random.default_rng(17)
        for _ in range(20):
            p = random_convex_polygon(rng, radius=0.15)
            area, per = polygon_area(p), perimeter(p)
            for r in (0.05, 0.1, 0.5):
                grown = polygon_area(dilate(p, r))
                assert grown >= area + per * r + 0.99 * math.pi * r * r
                assert grown <= area + per * r + math.pi * r * r + 1e-12

    def test_dilate_rejects_negative(self) -> None:
        with pytest.raises(ValueError):
            dilate(square(1.0), -0.1)


class TestIntersection:
    def test_disjoint(self) -> None:
        assert intersection_area(square(1.0), square(1.0, cx=3.0)) == 0.0

    def test_identical(self) -> None:
        p = square(1.0)
        assert intersection_area(p, p) == pytest.approx(1.0)

    def test_half_overlap(self) -> None:
        assert intersection_area(square(1.0), square(1.0, cx=0.5)) == pytest.approx(0.5)

    @given(poly_strategy("sym-p"), poly_strategy("sym-q"))
    def test_symmetry_exact(self, p: ConvexPolygon, q: ConvexPolygon) -> None:
        assert intersection_area(p, q) == intersection_area(q, p)

    @given(poly_strategy("min-p"), poly_strategy("min-q"))
    def test_bounded_by_min_area(self, p: ConvexPolygon, q: ConvexPolygon) -> None:
        assert intersection_area(p, q) <= min(polygon_area(p), polygon_area(q)) + 1e-12

    @given(
        poly_strategy("tr-p"),
        poly_strategy("tr-q"),
        st.floats(-100.0, 100.0),
        st.floats(-100.0, 100.0),
    )
    def test_translation_invariance(
        self, p: ConvexPolygon, q: ConvexPolygon, dx: float, dz: float
    ) -> None:
        moved = intersection_area(p.translated(dx, dz), q.translated(dx, dz))
        assert moved == pytest.approx(intersection_area(p, q), abs=1e-9)

    def test_monte_carlo_oracle_spot_checks(self) -> None:
        # The full 50-pair / 1e6-sample sweep lives in the acceptance gate.
        rng = np.random.default_rng(23)
        for _ in range(5):
            p = random_convex_polygon(rng)
            q = random_convex_polygon(rng, center=(rng.uniform(-1, 1), rng.uniform(-1, 1)))
            got = intersection_area(p, q)
            est = mc_intersection_area(p, q, rng, samples=200_000)
            if got < 0.1:
                assert est == pytest.approx(got, abs=5e-3)
            else:
                assert est == pytest.approx(got, rel=0.02)


class TestSeparation:
    def test_sat_matches_area_on_random_boxes(self) -> None:
        rng = np.random.default_rng(29)
        disagreements = 0
        for _ in range(200):
            a = (0.0, 0.0, rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0), rng.uniform(0, 360))
            b = (
                rng.uniform(-2.0, 2.0),
                rng.uniform(-2.0, 2.0),
                rng.uniform(0.2, 1.0),
                rng.uniform(0.2, 1.0),
                rng.uniform(0, 360),
            )
            pa = convex_hull(oriented_box_corners(*a))
            pb = convex_hull(oriented_box_corners(*b))
            area_hit = intersection_area(pa, pb) > 0.0
            if area_hit != sat_boxes_overlap(a, b):
                disagreements += 1
            assert sat_overlap(pa, pb) == sat_boxes_overlap(a, b)
        assert disagreements == 0

    def test_separation_sign(self) -> None:
        assert separation(square(1.0), square(1.0, cx=3.0)) == pytest.approx(2.0)
        assert separation(square(1.0), square(1.0, cx=0.5)) < 0.0

    def test_minimal_translation_separates(self) -> None:
        rng = np.random.default_rng(31)
        for _ in range(50):
            p = random_convex_polygon(rng)
            q = random_convex_polygon(rng, center=(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)))
            mtv = minimal_translation(p, q)
            if intersection_area(p, q) == 0.0:
                assert mtv is None
                continue
            assert mtv is not None
            (dx, dz), depth = mtv
            assert depth > 0.0
            moved = q.translated(dx * (depth + 1e-9), dz * (depth + 1e-9))
            assert intersection_area(p, moved) == pytest.approx(0.0, abs=1e-9)

    def test_disjoint_iff_zero_area(self) -> None:
        rng = np.random.default_rng(37)
        for _ in range(100):
            p = random_convex_polygon(rng)
            q = random_convex_polygon(rng, center=(rng.uniform(-3, 3), rng.uniform(-3, 3)))
            assert (intersection_area(p, q) == 0.0) == (not sat_overlap(p, q))


class TestFootprint:
    def test_axis_aligned_cube(self) -> None:
        fp = footprint(box("b", half=(0.5, 0.5, 0.5)))
        assert polygon_area(fp) == pytest.approx(1.0)
        assert set(fp.vertices) == {(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)}

    def test_rotation_preserves_area(self) -> None:
        fp = footprint(box("b", half=(0.5, 0.5, 0.5), yaw=45.0))
        assert polygon_area(fp) == pytest.approx(1.0)

    def test_rectangle_extents(self) -> None:
        fp = footprint(box("b", half=(1.0, 0.5, 2.0)))
        assert polygon_area(fp) == pytest.approx(8.0)

    def test_pitched_box_widens_footprint(self) -> None:
        flat = polygon_area(footprint(box("b", half=(0.5, 0.5, 0.5))))
        obj = box("b", half=(0.5, 0.5, 0.5))
        from scenelayout.scene import Orientation

        tilted = obj.rotated_to(Orientation(0.0, 45.0, 0.0))
        assert polygon_area(footprint(tilted)) > flat
