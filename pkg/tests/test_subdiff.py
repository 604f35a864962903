import itertools

import numpy as np
import pytest
import shapely
from hypothesis import given
from hypothesis import strategies as st
from shapely.geometry import Polygon as SPolygon

from discrete_ma.envelope import lower_hull, lower_hull_points
from discrete_ma.errors import EquivalenceViolation
from discrete_ma.lattice import Box, build_domain
from discrete_ma.meshfn import MeshFunction, sample
from discrete_ma.subdiff import (
    SlopeCell,
    cell_hausdorff,
    cell_volume,
    discrete_subdifferential,
    equivalence_check,
    hull_cells,
    hull_normal_cell,
    union_volume,
)

from conftest import DISK, HEXAGON, SQUARE, hat_1d, random_convex_mesh


def brute_force_cell(u, i):
    """Vertices of {p : p.(y - x) <= u(y) - u(x)} by enumerating constraint pairs."""
    A = np.delete(u.dom.nodes - u.dom.nodes[i], i, axis=0)
    b = np.delete(u.values - u.values[i], i)
    j, k = np.triu_indices(len(b), 1)
    det = A[j, 0] * A[k, 1] - A[j, 1] * A[k, 0]
    ok = np.abs(det) > 1e-14
    j, k, det = j[ok], k[ok], det[ok]
    # Cramer's rule for every pair of constraint lines at once
    p = np.stack([b[j] * A[k, 1] - b[k] * A[j, 1], A[j, 0] * b[k] - A[k, 0] * b[j]], axis=1) / det[:, None]
    feasible = np.all(p @ A.T <= b + 1e-9, axis=1)
    return p[feasible]


def to_shapely(cell):
    return SPolygon(cell.vertices) if len(cell.vertices) >= 3 else None


# -- examples ----------------------------------------------------------------


def test_direct_1d_examples():
    c = discrete_subdifferential(hat_1d((1.0, 0.0, 1.0)), (0.0,))
    assert (c.lo, c.hi) == (-1.0, 1.0)
    assert discrete_subdifferential(hat_1d((0.0, 0.5, 0.0)), (0.0,)).is_empty


def test_direct_abs1norm_square():
    dom = build_domain(SQUARE, 0.5, 1)
    u = sample(lambda x: abs(x[0]) + abs(x[1]), dom)
    i = dom.node_id((0, 0))
    cell = discrete_subdifferential(u, i)
    assert cell_volume(cell) == pytest.approx(4.0, abs=1e-9)
    oracle = brute_force_cell(u, i)
    assert SPolygon(oracle).convex_hull.area == pytest.approx(4.0, abs=1e-9)
    assert cell_hausdorff(cell, SlopeCell(2, [(-1, -1), (1, -1), (1, 1), (-1, 1)])) < 1e-9


def test_hull_cell_examples(quadratic_1d):
    hull = lower_hull_points(np.array([[-1.5], [-1.0], [1.0], [1.5]]), np.array([1.0, 0.0, 0.0, 1.0]))
    c = hull_normal_cell(hull, None, 1)  # point id of B = (-1, 0)
    assert (c.lo, c.hi) == pytest.approx((-2.0, 0.0), abs=1e-12)
    c = hull_normal_cell(lower_hull(quadratic_1d), quadratic_1d, (0.0,))
    assert (c.lo, c.hi) == pytest.approx((-0.25, 0.25), abs=1e-12)


def test_hull_cell_affine_is_point(square_h4):
    u = sample(lambda x: 2 * x[0] - x[1], square_h4)
    c = hull_normal_cell(lower_hull(u), u, (0.25, 0.5))
    assert cell_volume(c) == 0.0
    assert np.allclose(c.vertices, [[2.0, -1.0]], atol=1e-9)


def test_hull_cell_at_points_inside_and_on_edges():
    dom = build_domain(SQUARE, 1.0, 1)
    u = sample(lambda x: abs(x[0]) + abs(x[1]), dom)
    hull = lower_hull(u)
    inside = hull_normal_cell(hull, None, np.array([0.5, 0.2]))
    assert len(inside.vertices) == 1 and np.allclose(inside.vertices[0], [1, 1])
    edge = hull_normal_cell(hull, None, np.array([0.0, 0.5]))  # on the x2 axis
    assert np.allclose(np.sort(edge.vertices[:, 0]), [-1, 1]) and np.allclose(edge.vertices[:, 1], 1)


def test_cell_volume_examples():
    assert cell_volume(SlopeCell.interval(-1.0, 1.0)) == 2.0
    assert cell_volume(SlopeCell(2, [(-1, -1), (1, -1), (1, 1), (-1, 1)])) == 4.0
    assert cell_volume(SlopeCell.empty(2)) == 0.0
    assert cell_volume(SlopeCell(2, [(0, 0), (1, 1)])) == 0.0


def test_equivalence_examples(square_h4):
    u = sample(lambda x: 0.5 * x @ x, square_h4)
    hull = lower_hull(u)
    for i in range(square_h4.n_interior):
        assert equivalence_check(u, hull, i).equal
    bump = hat_1d((0.0, 0.5, 0.0))
    pair = equivalence_check(bump, lower_hull(bump), 0)
    assert pair.equal and not pair.contact and pair.direct_cell.is_empty


def test_equivalence_violation_is_reported():
    u = hat_1d((1.0, 0.0, 1.0))
    wrong = lower_hull_points(u.dom.nodes, np.array([0.0, 5.0, 5.0]))  # hull of other data
    with pytest.raises(EquivalenceViolation) as info:
        equivalence_check(u, wrong, 0, contact=True)
    assert info.value.pair.node == 0


def test_union_1d_exact():
    cells = [SlopeCell.interval(0, 1), SlopeCell.interval(0.5, 2), SlopeCell.interval(3, 4), SlopeCell.empty(1)]
    assert union_volume(cells) == 3.0


def test_dump_line():
    assert SlopeCell.interval(-1.0, 0.5).dump(3) == "C 3 2 -1 0.5"


# -- properties --------------------------------------------------------------

small = st.tuples(st.sampled_from([(SQUARE, 0.25), (DISK, 0.25), (HEXAGON, 0.25)]), st.integers(0, 10**6), st.sampled_from([0.0, 0.25]))


def small_case(case):
    (spec, h), seed, bumps = case
    dom = build_domain(spec, h, 2)
    return random_convex_mesh(dom, seed, bumps)


@given(small)
def test_direct_cell_matches_vertex_enumeration(case):
    u = small_case(case)
    for i in range(0, u.dom.n_interior, 4):
        cell = discrete_subdifferential(u, i)
        oracle = brute_force_cell(u, i)
        if len(oracle) == 0:
            assert cell.is_empty
            continue
        ring = SPolygon(oracle).convex_hull
        if ring.area > 1e-9:
            assert cell_volume(cell) == pytest.approx(ring.area, rel=1e-8, abs=1e-10)


@given(small, st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_translation_covariance(case, a0, a1, c):
    u = small_case(case)
    a = np.array([a0, a1])
    v = u + (u.dom.nodes @ a + c)
    for i in range(0, u.dom.n_interior, 5):
        cu, cv = discrete_subdifferential(u, i), discrete_subdifferential(v, i)
        assert cu.is_empty == cv.is_empty
        if not cu.is_empty:
            assert cell_hausdorff(cu.translate(a), cv) <= 1e-10 * (1 + np.abs(cv.vertices).max())


@given(st.integers(0, 10**6), st.sampled_from([0.05, 0.1, 0.2]))
def test_1d_cells_are_consecutive(seed, h):
    dom = build_domain(Box((-1.0,), (1.0,)), h, 1)
    rng = np.random.default_rng(seed)
    x = dom.nodes[:, 0]
    u = MeshFunction(dom, np.abs(x - rng.uniform(-1, 1)) + rng.uniform(0, 2) * x**2)
    hull = lower_hull(u)
    cells, contact = hull_cells(u, hull)
    order = np.argsort(x[: dom.n_interior])
    seq = [cells[i] for i in order if contact[i]]
    for prev, cur in zip(seq, seq[1:]):
        assert prev.lo <= cur.lo and prev.hi <= cur.hi
        assert cur.lo == pytest.approx(prev.hi, abs=1e-12)


@given(small)
def test_cells_overlap_in_measure_zero_and_union_adds(case):
    u = small_case(case)
    assert u.dom.n_interior <= 100
    cells, contact = hull_cells(u, lower_hull(u))
    polys = [to_shapely(c) for c in cells if to_shapely(c) is not None]
    for P, Q in itertools.combinations(polys, 2):
        assert P.intersection(Q).area <= 1e-9
    total = sum(p.area for p in polys)
    union = shapely.unary_union(polys).area
    assert union == pytest.approx(total, rel=1e-6)


@given(small)
def test_quasi_monte_carlo_union(case):
    u = small_case(case)
    cells, _ = hull_cells(u, lower_hull(u))
    polys = [to_shapely(c) for c in cells if to_shapely(c) is not None]
    exact = shapely.unary_union(polys).area
    assert union_volume(cells, n_samples=2**16) == pytest.approx(exact, rel=0.01)
