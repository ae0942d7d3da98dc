import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opos.geometry import (
    ConvexPolygon,
    GeometryError,
    OrientedRect,
    Point2,
    carver_lhs,
    convex_hull,
    dims_fit,
    min_area_rect,
    penetration_vector,
    polygons_intersect,
    rect_fits_in_rect,
)
from oracles import brute_hull_vertices, random_convex, raster_intersect, rect_fit_slack, sweep_min_rect_area

coords = st.floats(-500, 500, allow_nan=False, allow_infinity=False)
point_lists = st.lists(st.tuples(coords, coords), min_size=1, max_size=40)


def test_hull_drops_interior_point():
    h = convex_hull([(0, 0), (10, 0), (0, 10), (2, 2)])
    assert h == ConvexPolygon([(0, 0), (10, 0), (0, 10)])


def test_hull_collinear_is_segment():
    h = convex_hull([(0, 0), (5, 0), (10, 0)])
    assert h == ConvexPolygon([(0, 0), (10, 0)])


def test_hull_single_and_duplicates():
    assert len(convex_hull([(3, 4)])) == 1
    assert len(convex_hull([(3, 4), (3, 4), (3, 4)])) == 1


def test_hull_empty_raises():
    with pytest.raises(GeometryError):
        convex_hull([])


def test_hull_rejects_nan():
    with pytest.raises(GeometryError):
        convex_hull([(0, 0), (float("nan"), 1)])


def test_hull_is_ccw_and_strictly_convex():
    rng = np.random.default_rng(3)
    h = convex_hull(rng.uniform(0, 100, (60, 2))).vertices
    e = np.roll(h, -1, axis=0) - h
    cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    assert np.all(cross > 0)


def test_hull_matches_brute_force_on_random_sets():
    rng = np.random.default_rng(11)
    for _ in range(20):
        pts = rng.uniform(0, 100, (50, 2))
        got = {tuple(map(float, v)) for v in convex_hull(pts).vertices}
        assert got == brute_hull_vertices(pts)


@given(point_lists)
def test_hull_idempotent(pts):
    h = convex_hull(pts)
    assert convex_hull(h.vertices) == h


@given(point_lists)
def test_hull_contains_inputs(pts):
    h = convex_hull(pts)
    if len(h) >= 3:
        assert all(h.contains(p, tol=1e-6) for p in pts)


def test_min_rect_square():
    r = min_area_rect(convex_hull([(0, 0), (25.4, 0), (25.4, 25.4), (0, 25.4)]))
    assert r.length == pytest.approx(25.4) and r.width == pytest.approx(25.4)
    assert r.angle == pytest.approx(0.0, abs=1e-9)


def test_min_rect_segment():
    r = min_area_rect(convex_hull([(0, 0), (60, 0)]))
    assert r.length == pytest.approx(60) and r.width == 0.0
    assert r.angle == pytest.approx(0.0, abs=1e-9)
    assert r.center == pytest.approx((30, 0))


def test_min_rect_single_point():
    r = min_area_rect(convex_hull([(5, 6)]))
    assert (r.length, r.width) == (0.0, 0.0)


def test_min_rect_rotated_rectangle():
    corners = OrientedRect(Point2(10, 20), 80, 30, 33.0).corners()
    r = min_area_rect(convex_hull(corners))
    assert (r.length, r.width) == pytest.approx((80, 30))
    assert r.angle == pytest.approx(33.0)
    assert r.center == pytest.approx((10, 20))


def test_min_rect_matches_angle_sweep():
    rng = np.random.default_rng(5)
    for _ in range(100):
        pts = rng.uniform(0, 100, (6, 2))
        got = min_area_rect(convex_hull(pts))
        # never worse than the 0.05 degree sweep
        assert got.area <= sweep_min_rect_area(pts) * 1.001 + 1e-9
        # and within 0.1% of a sweep fine enough for thin hulls
        fine = sweep_min_rect_area(pts, step_deg=0.001)
        assert abs(got.area - fine) <= 0.001 * fine + 1e-9


def test_min_rect_encloses_hull_and_touches_an_edge():
    rng = np.random.default_rng(6)
    for _ in range(50):
        hull = convex_hull(rng.uniform(-50, 50, (12, 2)))
        r = min_area_rect(hull)
        poly = r.polygon()
        assert all(poly.contains(p, tol=1e-6) for p in hull.vertices)
        # one rectangle side is parallel to some hull edge
        e = np.roll(hull.vertices, -1, axis=0) - hull.vertices
        ang = np.degrees(np.arctan2(e[:, 1], e[:, 0])) % 90.0
        diff = np.abs((ang - r.angle % 90.0 + 45.0) % 90.0 - 45.0)
        assert diff.min() < 1e-6


def test_oriented_rect_normalizes():
    r = OrientedRect(Point2(0, 0), 10, 20, 170.0)
    assert (r.length, r.width) == (20, 10)
    assert r.angle == pytest.approx(80.0)
    assert OrientedRect(Point2(0, 0), 5, 1, -30).angle == pytest.approx(150.0)


def test_rec_in_rec_anchors():
    outer = OrientedRect(Point2(0, 0), 100, 84)
    assert rect_fits_in_rect(OrientedRect(Point2(0, 0), 80, 25), outer)
    assert rect_fits_in_rect(OrientedRect(Point2(0, 0), 102.5, 25), outer)
    assert 2.12 <= carver_lhs(102.5, 25, 100, 84) <= 2.13
    assert rect_fits_in_rect(OrientedRect(Point2(0, 0), 100, 84), outer)
    assert not rect_fits_in_rect(OrientedRect(Point2(0, 0), 120, 90), outer)


def test_rec_in_rec_square_inner():
    # p = q never reaches the tilted branch: a square fits iff its side fits b
    assert dims_fit(84, 84, 100, 84)
    assert not dims_fit(84.01, 84.01, 100, 84)
    assert dims_fit(50, 50, 50, 50)


def test_rec_in_rec_agrees_with_rotation_sweep():
    rng = np.random.default_rng(8)
    checked = 0
    for _ in range(3000):
        a, b = sorted(rng.uniform(20, 150, 2), reverse=True)
        p = rng.uniform(0.5 * a, 1.6 * a)
        q = rng.uniform(0, p)
        s = rect_fit_slack(p, q, a, b)
        if abs(s) < 1e-3:
            continue
        checked += 1
        assert dims_fit(p, q, a, b) == (s > 0), (p, q, a, b, s)
    assert checked > 2500


@given(
    st.floats(1, 150), st.floats(0, 150), st.floats(0.01, 1.0), st.floats(0.01, 1.0)
)
def test_rec_in_rec_monotone(p, q, fp, fq):
    p, q = max(p, q), min(p, q)
    if dims_fit(p, q, 100, 84):
        assert dims_fit(p * fp, q * fq, 100, 84)


def test_sat_far_apart_and_identical():
    sq = OrientedRect(Point2(0, 0), 1, 1).polygon()
    far = OrientedRect(Point2(100, 100), 1, 1).polygon()
    assert not polygons_intersect(sq, far)
    assert polygons_intersect(sq, sq)


def test_sat_touching_counts():
    a = ConvexPolygon([(0, 0), (10, 0), (10, 10), (0, 10)])
    b = ConvexPolygon([(10, 0), (20, 0), (20, 10), (10, 10)])
    assert polygons_intersect(a, b)
    c = ConvexPolygon([(10.001, 0), (20, 0), (20, 10), (10.001, 10)])
    assert not polygons_intersect(a, c)


def test_sat_degenerate_inputs():
    sq = ConvexPolygon([(0, 0), (10, 0), (10, 10), (0, 10)])
    assert polygons_intersect(sq, ConvexPolygon([(5, 5)]))
    assert not polygons_intersect(sq, ConvexPolygon([(15, 5)]))
    assert polygons_intersect(sq, ConvexPolygon([(-5, 5), (15, 5)]))
    # a diagonal segment passing beside the corner
    assert not polygons_intersect(sq, ConvexPolygon([(11, -5), (16, 0)]))
    assert polygons_intersect(ConvexPolygon([(0, 0)]), ConvexPolygon([(0, 0)]))


def test_sat_matches_rasterization():
    rng = np.random.default_rng(21)
    agree = 0
    for _ in range(200):
        a = random_convex(rng, rng.uniform(0, 40, 2), rng.uniform(3, 15))
        b = random_convex(rng, rng.uniform(0, 40, 2), rng.uniform(3, 15))
        got = polygons_intersect(ConvexPolygon(a), ConvexPolygon(b))
        assert got == polygons_intersect(ConvexPolygon(b), ConvexPolygon(a))
        agree += got == raster_intersect(a, b)
    assert agree >= 199


def test_penetration_vector_separates():
    a = ConvexPolygon([(0, 0), (10, 0), (10, 10), (0, 10)])
    b = a.transformed(0, (8, 1))
    mtv = penetration_vector(a, b)
    assert mtv == pytest.approx([2, 0])
    moved = ConvexPolygon(b.vertices + mtv * 1.0001)
    assert not polygons_intersect(a, moved, tol=0.0)
    assert penetration_vector(a, a.transformed(0, (30, 0))) is None


def test_polygon_area_and_contains():
    sq = ConvexPolygon([(0, 0), (2, 0), (2, 2), (0, 2)])
    assert sq.area == pytest.approx(4)
    assert sq.contains((2, 1)) and not sq.contains((2.1, 1))
    assert math.isclose(sq.centroid().x, 1.0)
