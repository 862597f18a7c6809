import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mahjb.geometry import (
    Containment,
    DomainPolygon,
    DomainSpec,
    GeometryError,
    build_domain,
    classify_points,
    clip_ray,
    concave_bent_radius,
    contains_exact,
    convex_bent_radius,
    point_in_polygon,
)

UNIT = build_domain(DomainSpec("unit_square"), 1.0)
LSHAPE = build_domain(DomainSpec("lshape"), 1.0)
SQUARE = build_domain(DomainSpec("square"), 1.0)


def test_lshape_vertices():
    expected = [(1, -1), (1, 1), (-1, 1), (-1, 0), (0, 0), (0, -1)]
    np.testing.assert_array_equal(LSHAPE.vertices, expected)
    assert LSHAPE.area == pytest.approx(3.0)


def test_square_is_exact():
    assert len(SQUARE) == 4
    assert SQUARE.area == 4.0


@pytest.mark.parametrize(
    "p, expected",
    [
        ((0, 0), Containment.INTERIOR),
        ((1, 0), Containment.BOUNDARY),
        ((1.5, 0), Containment.EXTERIOR),
        ((1, 1), Containment.BOUNDARY),
    ],
)
def test_point_in_square(p, expected):
    assert point_in_polygon(p, SQUARE) == expected


def test_removed_quadrant_is_exterior():
    assert point_in_polygon((-0.5, -0.5), LSHAPE) == Containment.EXTERIOR
    assert point_in_polygon((0, -0.5), LSHAPE) == Containment.BOUNDARY


def test_clip_ray_examples():
    assert clip_ray((0.5, 0.5), (1, 0), 1.0, UNIT) == pytest.approx(0.5, abs=1e-14)
    assert clip_ray((0.5, 0.5), (1, 0), 0.3, UNIT) == 0.3
    # the ray must stop at the re-entrant edge instead of crossing the missing quadrant
    assert clip_ray((0.5, -0.5), (-1, 0), 2.0, LSHAPE) == pytest.approx(0.5, abs=1e-14)


def test_clip_ray_rejects_exterior_origin():
    with pytest.raises(GeometryError):
        clip_ray((-0.5, -0.5), (1, 0), 1.0, LSHAPE)
    with pytest.raises(GeometryError):
        clip_ray((1.0, 0.0), (1, 0), 1.0, SQUARE)


def _brute_force_arm(origin, d, max_len, poly, n=10_000):
    t = np.linspace(0, max_len, n + 1)
    pts = np.asarray(origin) + t[:, None] * np.asarray(d)
    ok = classify_points(pts, poly) != Containment.EXTERIOR
    bad = np.flatnonzero(~ok)
    return max_len if bad.size == 0 else t[bad[0] - 1]


def test_clip_ray_matches_sampling_oracle_on_lshape(rng):
    for _ in range(50):
        o = rng.uniform(-1, 1, 2)
        if point_in_polygon(o, LSHAPE) != Containment.INTERIOR:
            continue
        a = rng.uniform(0, 2 * np.pi)
        d = np.array([np.cos(a), np.sin(a)])
        arm = clip_ray(o, d, 3.0, LSHAPE)
        assert abs(arm - _brute_force_arm(o, d, 3.0, LSHAPE)) <= 3.0 / 10_000 + 1e-12


def _bisection_exit(o, d, poly):
    lo, hi = 0.0, 10.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        inside = classify_points((o + mid * d)[None], poly)[0] != Containment.EXTERIOR
        lo, hi = (mid, hi) if inside else (lo, mid)
    return lo


def test_clip_ray_convex_matches_bisection(rng):
    poly = build_domain(DomainSpec("bent_square_convex", 3.0), 0.1)
    for _ in range(30):
        o = rng.uniform(-0.9, 0.9, 2)
        a = rng.uniform(0, 2 * np.pi)
        d = np.array([np.cos(a), np.sin(a)])
        assert clip_ray(o, d, math.inf, poly) == pytest.approx(_bisection_exit(o, d, poly), abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-0.99, 0.99), st.floats(-0.99, 0.99), st.floats(0, 2 * math.pi),
    st.floats(0.01, 3.0), st.floats(0.01, 3.0),
)
def test_clip_ray_segment_stays_inside_and_is_monotone(x, y, a, l1, l2):
    o = np.array([x, y])
    if point_in_polygon(o, LSHAPE) != Containment.INTERIOR:
        return
    d = np.array([math.cos(a), math.sin(a)])
    arm = clip_ray(o, d, l1, LSHAPE)
    assert 0 < arm <= l1
    pts = o + np.outer([0.25, 0.5, 0.75], d) * arm
    assert np.all(classify_points(pts, LSHAPE) != Containment.EXTERIOR)
    lo, hi = sorted((l1, l2))
    assert clip_ray(o, d, lo, LSHAPE) <= clip_ray(o, d, hi, LSHAPE)


def test_bent_radii_pass_through_corners():
    for c in (3.0, 10.0, 100.0):
        assert math.dist((c, 0), (-1, 1)) == pytest.approx(convex_bent_radius(c))
        assert math.dist((c, 0), (1, 1)) == pytest.approx(concave_bent_radius(c))


@pytest.mark.parametrize("c", [3.0, 10.0, 100.0])
def test_convex_bent_square_is_convex(c):
    poly = build_domain(DomainSpec("bent_square_convex", c), 0.1)
    assert poly.is_convex()
    assert poly.is_simple()


@pytest.mark.parametrize("family", ["bent_square_convex", "bent_square_concave"])
def test_bent_square_area_against_monte_carlo(family):
    spec = DomainSpec(family, 3.0)
    poly = build_domain(spec, 0.01)
    rng = np.random.default_rng(7)
    lo, hi = -1.2, 1.2
    inside = 0
    n = 10_000_000
    for _ in range(10):
        pts = rng.uniform(lo, hi, (n // 10, 2))
        inside += int(np.count_nonzero(contains_exact(spec, pts)))
    mc = inside / n * (hi - lo) ** 2
    # polygonal chords lose O(h^2) area per arc; Monte-Carlo noise is ~1e-3
    assert poly.area == pytest.approx(mc, rel=3e-3)


def test_heart_and_disc_square_areas():
    heart = build_domain(DomainSpec("heart"), 0.01)
    assert heart.area == pytest.approx(math.pi / 2 + math.pi / 4, rel=1e-3)
    ds = build_domain(DomainSpec("disc_union_square"), 0.01)
    assert ds.area == pytest.approx(3 * math.pi / 4 + 1, rel=1e-3)
    assert heart.is_simple() and ds.is_simple()


def test_domain_errors():
    with pytest.raises(GeometryError):
        DomainSpec("pentagon")
    with pytest.raises(GeometryError):
        DomainSpec("bent_square_convex", 1.0)
    with pytest.raises(GeometryError):
        build_domain(DomainSpec("heart"), 0.5)  # arcs would get fewer than 8 samples


def test_clockwise_polygon_rejected():
    with pytest.raises(GeometryError):
        DomainPolygon(np.array([(0, 0), (0, 1), (1, 1), (1, 0)], dtype=float))
