import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hugmodel.errors import DomainError
from hugmodel.geometry import count_inside, hull_area, inside_mask, monotone_chain_hull
from oracles import (brute_force_hull, ccw_order, exact_polygon_area, inside_by_triangles,
                     random_point_set)

coords = st.floats(0.0, 1.0, allow_nan=False, width=64)
point_sets = arrays(np.float64, st.tuples(st.integers(1, 15), st.just(2)), elements=coords)


def test_unit_square_with_center():
    pts = [[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]]
    h = monotone_chain_hull(pts)
    assert {tuple(v) for v in h.vertices} == {(0, 0), (1, 0), (1, 1), (0, 1)}
    assert hull_area(h) == 1.0


def test_collinear_points_give_segment():
    h = monotone_chain_hull([[0, 0], [0.5, 0.5], [1, 1]])
    assert h.degenerate and len(h) == 2
    assert hull_area(h) == 0.0


def test_single_and_duplicate_points():
    h = monotone_chain_hull([[0.2, 0.3], [0.2, 0.3]])
    assert len(h) == 1
    assert count_inside(h, [[0.2, 0.3], [0.2, 0.31]]) == 1


def test_empty_and_nonfinite_inputs_raise():
    with pytest.raises(DomainError):
        monotone_chain_hull(np.empty((0, 2)))
    with pytest.raises(DomainError):
        monotone_chain_hull([[0, 0], [np.nan, 1], [1, 1]])


def test_boundary_points_count_as_inside():
    h = monotone_chain_hull([[0, 0], [1, 0], [0, 1]])
    pts = [[0.5, 0.0], [0.0, 0.5], [0.5, 0.5], [0.0, 0.0], [0.51, 0.5]]
    assert inside_mask(h, pts).tolist() == [True, True, True, True, False]


def test_segment_containment():
    h = monotone_chain_hull([[0, 0], [1, 1]])
    assert inside_mask(h, [[0.5, 0.5], [1.0, 1.0], [1.1, 1.1], [0.5, 0.6]]).tolist() == [
        True, True, False, False]


def test_triangle_area_matches_half_base_height():
    h = monotone_chain_hull([[0.1, 0.1], [0.9, 0.1], [0.3, 0.7]])
    assert hull_area(h) == pytest.approx(0.5 * 0.8 * 0.6, abs=1e-15)


def test_against_brute_force_on_mixed_sets():
    rng = np.random.default_rng(0)
    for _ in range(300):
        pts = random_point_set(rng, int(rng.integers(3, 13)))
        h = monotone_chain_hull(pts)
        assert {tuple(v) for v in h.vertices} == brute_force_hull(pts)
        ref = exact_polygon_area(ccw_order(brute_force_hull(pts)))
        assert abs(hull_area(h) - float(ref)) <= 1e-12


def test_monte_carlo_area_agrees():
    rng = np.random.default_rng(1)
    pts = rng.random((12, 2))
    h = monotone_chain_hull(pts)
    probe = rng.random((200_000, 2))
    frac = inside_mask(h, probe).mean()
    se = np.sqrt(frac * (1 - frac) / len(probe))
    assert abs(frac - hull_area(h)) < 4 * se


@given(point_sets)
def test_hull_vertices_are_input_points_in_ccw_order(pts):
    h = monotone_chain_hull(pts)
    inputs = {tuple(p) for p in pts}
    assert all(tuple(v) in inputs for v in h.vertices)
    v = h.vertices
    if len(v) >= 3:
        for i in range(len(v)):
            a, b, c = v[i], v[(i + 1) % len(v)], v[(i + 2) % len(v)]
            assert (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]) > 0


@given(point_sets)
def test_all_inputs_inside_own_hull(pts):
    h = monotone_chain_hull(pts)
    assert count_inside(h, pts) == len(pts)


@given(point_sets)
def test_area_invariant_under_permutation_and_translation(pts):
    a = hull_area(monotone_chain_hull(pts))
    b = hull_area(monotone_chain_hull(pts[::-1]))
    c = hull_area(monotone_chain_hull(pts + np.array([0.25, -0.5])))
    assert a == pytest.approx(b, abs=1e-12)
    assert a == pytest.approx(c, abs=1e-9)


@given(point_sets, arrays(np.float64, st.tuples(st.integers(1, 10), st.just(2)), elements=coords))
def test_adding_points_never_shrinks_area(pts, extra):
    a = hull_area(monotone_chain_hull(pts))
    b = hull_area(monotone_chain_hull(np.vstack([pts, extra])))
    assert b >= a - 1e-12


@given(arrays(np.float64, st.tuples(st.integers(3, 10), st.just(2)), elements=coords),
       arrays(np.float64, st.tuples(st.integers(1, 20), st.just(2)), elements=coords))
def test_containment_matches_triangle_fan(pts, probes):
    h = monotone_chain_hull(pts)
    if h.degenerate:
        return
    mask = inside_mask(h, probes)
    for p, m in zip(probes, mask):
        assert m == inside_by_triangles(h.vertices, p)
