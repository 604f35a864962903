import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial import ConvexHull

from discrete_ma.errors import DomainError, EmptyInterior, MissingNode
from discrete_ma.lattice import (
    Ball,
    Box,
    DirectionSet,
    Polygon,
    boundary_step,
    build_domain,
    contains,
    contains_closure,
    parse_domain,
)

from conftest import DISK, HEXAGON, SQUARE


def as_set(points):
    return {tuple(np.round(p, 12)) for p in np.atleast_2d(points)}


# -- boundary steps ----------------------------------------------------------


def test_step_when_neighbor_is_on_boundary():
    dom = build_domain(Box((0.0, 0.0), (1.0, 1.0)), 0.5, 1)
    assert boundary_step(dom, (0.5, 0.5), (1, 0)) == 0.5


def test_step_crossing_box_edge():
    dom = build_domain(Box((0.0, 0.0), (1.0, 1.0)), 0.75, 1)
    assert boundary_step(dom, (0.75, 0.75), (1, 0)) == pytest.approx(0.25, abs=1e-12)


def test_step_crossing_circle():
    dom = build_domain(Ball((0.0, 0.0), 1.0), 0.6, 1)
    assert boundary_step(dom, (0.6, 0.0), (1, 0)) == pytest.approx(0.4, abs=1e-12)


def test_step_for_direction_outside_stencil():
    dom = build_domain(DISK, 0.25, 1)
    # diagonal at (0.5, 0.5): |(0.75, 0.75)| > 1, exit where 2 t^2 = 1
    s = boundary_step(dom, (0.5, 0.5), (1, 1))
    assert s == pytest.approx(np.sqrt(0.5) - 0.5, abs=1e-12)


# -- domain construction -----------------------------------------------------


def test_unit_square_coarse():
    dom = build_domain(Box((0.0, 0.0), (1.0, 1.0)), 0.5, DirectionSet.canonical(2))
    assert as_set(dom.interior_nodes) == {(0.5, 0.5)}
    assert as_set(dom.boundary_nodes) == {(0.0, 0.5), (1.0, 0.5), (0.5, 0.0), (0.5, 1.0)}


def test_segment():
    dom = build_domain(Box((0.0,), (1.0,)), 0.25, 1)
    assert np.allclose(dom.interior_nodes[:, 0], [0.25, 0.5, 0.75])
    assert np.allclose(np.sort(dom.boundary_nodes[:, 0]), [0.0, 1.0])


def test_single_interior_point_off_grid():
    dom = build_domain(Box((0.0, 0.0), (1.0, 1.0)), 0.7, 1)
    assert as_set(dom.interior_nodes) == {(0.7, 0.7)}


def test_empty_interior():
    with pytest.raises(EmptyInterior):
        build_domain(Box((0.0, 0.0), (1.0, 1.0)), 1.0, 1)


def test_bad_mesh_length():
    with pytest.raises(DomainError):
        build_domain(SQUARE, -0.1, 1)
    with pytest.raises(DomainError):
        build_domain(SQUARE, 10.0, 1)


def test_node_order_and_lookup(square_h4):
    dom = square_h4
    lat = dom.lattice[: dom.n_interior]
    assert [tuple(k) for k in lat.tolist()] == sorted(tuple(k) for k in lat.tolist())
    for i in (0, dom.n_interior - 1, dom.n_nodes - 1):
        assert dom.node_id(dom.nodes[i]) == i
    with pytest.raises(MissingNode):
        dom.node_id((0.1, 0.1))
    with pytest.raises(MissingNode):
        dom.interior_id(dom.n_nodes - 1)


def test_dump_format():
    dom = build_domain(Box((0.0, 0.0), (1.0, 1.0)), 0.5, DirectionSet.canonical(2))
    lines = dom.dump().splitlines()
    assert lines[0] == "I 0.5 0.5"
    assert sorted(lines[1:]) == ["B 0 0.5", "B 0.5 0", "B 0.5 1", "B 1 0.5"]


domains = st.sampled_from([SQUARE, DISK, HEXAGON, Box((-0.3, 0.1), (0.9, 0.8)), Ball((0.2, -0.1), 0.7)])
mesh_lengths = st.sampled_from([0.09, 0.125, 0.17, 0.25])


@given(domains, mesh_lengths, st.integers(1, 2))
def test_interior_is_exactly_the_inside_lattice(spec, h, r):
    dom = build_domain(spec, h, r)
    lo, hi = spec.bbox()
    axes = [np.arange(np.floor(a / h) - 1, np.ceil(b / h) + 2) * h for a, b in zip(lo, hi)]
    grid = np.array(list(itertools.product(*axes)))
    inside = grid[contains(spec, grid, 1e-10 * h)]
    assert as_set(inside) == as_set(dom.interior_nodes)


@given(domains, mesh_lengths, st.integers(1, 2))
def test_boundary_nodes_on_boundary_and_distinct(spec, h, r):
    dom = build_domain(spec, h, r)
    assert np.all(np.abs(spec.signed_distance(dom.boundary_nodes)) <= 1e-10 * spec.diameter)
    assert len(as_set(dom.nodes)) == dom.n_nodes
    # each boundary node is reached from some interior node along V
    reached = set()
    for j, e in enumerate(dom.V.directions):
        for i in range(dom.n_interior):
            nb = dom.neighbors[i, j]
            assert np.allclose(dom.nodes[nb], dom.nodes[i] + dom.steps[i, j] * e, atol=1e-12)
            reached.add(int(nb))
    assert reached >= set(range(dom.n_interior, dom.n_nodes))


@given(domains, mesh_lengths, st.integers(1, 2))
def test_steps_are_maximal(spec, h, r):
    dom = build_domain(spec, h, r)
    eps = 1e-6
    for j, e in enumerate(dom.V.directions):
        s = dom.steps[:, j]
        x = dom.interior_nodes
        assert np.all((s > 0) & (s <= h))
        assert np.all(contains_closure(spec, x + s[:, None] * e, 1e-12))
        short = s < h
        beyond = x[short] + (s[short, None] + eps * h) * e
        assert not np.any(contains_closure(spec, beyond))


@pytest.mark.parametrize("spec", [SQUARE, DISK, HEXAGON])
def test_node_count_monotone_in_h(spec):
    counts = [build_domain(spec, h, 1).n_nodes for h in (1 / 4, 1 / 8, 1 / 16, 1 / 32)]
    assert counts == sorted(counts)


@pytest.mark.parametrize("spec", [SQUARE, HEXAGON, Box((-0.3, 0.1), (0.9, 0.8))])
@pytest.mark.parametrize("h", [0.125, 0.1])
def test_hull_boundary_nodes_are_boundary_nodes(spec, h):
    dom = build_domain(spec, h, 1)
    hull = ConvexHull(dom.nodes)
    depth = -(dom.nodes @ hull.equations[:, :-1].T + hull.equations[:, -1]).max(axis=1)
    on_hull = np.flatnonzero(depth <= 1e-10)
    assert set(on_hull.tolist()) == set(range(dom.n_interior, dom.n_nodes))


# -- direction sets and parsing ---------------------------------------------


@pytest.mark.parametrize("d,r", [(1, 1), (2, 1), (2, 2), (2, 3)])
def test_direction_set_invariants(d, r):
    V = DirectionSet.of_radius(d, r)
    keys = {tuple(e) for e in V.directions.tolist()}
    for e in keys:
        assert tuple(-c for c in e) in keys
        assert np.gcd.reduce(np.abs(e)) == 1
        assert max(abs(c) for c in e) <= r
    for k in range(d):
        assert tuple(int(i == k) for i in range(d)) in keys
    assert V.radius == r


def test_direction_set_sizes():
    assert len(DirectionSet.of_radius(2, 1)) == 8
    assert len(DirectionSet.of_radius(2, 2)) == 16
    assert len(DirectionSet.canonical(2)) == 4
    assert (2, 1) in DirectionSet.of_radius(2, 2)
    assert (2, 2) not in DirectionSet.of_radius(2, 2)


def test_direction_set_rejects_bad_input():
    with pytest.raises(ValueError):
        DirectionSet(2, np.array([[1, 0], [-1, 0]]))  # no second axis
    with pytest.raises(ValueError):
        DirectionSet(2, np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [2, 0], [-2, 0]]))


@pytest.mark.parametrize(
    "text,expected",
    [
        ("box:0,0,1,1", Box((0.0, 0.0), (1.0, 1.0))),
        ("ball:0.5,0.5,2", Ball((0.5, 0.5), 2.0)),
        ("box:-1,1", Box((-1.0,), (1.0,))),
        ("polygon:0,0,1,0,0,1", Polygon(((0.0, 0.0), (1.0, 0.0), (0.0, 1.0)))),
    ],
)
def test_parse_domain(text, expected):
    spec = parse_domain(text)
    assert spec == expected
    assert parse_domain(spec.to_text()) == spec


def test_parse_polygon_file(tmp_path):
    f = tmp_path / "tri.txt"
    f.write_text("0 0\n2 0\n0 2\n")
    assert parse_domain(f"polygon:{f}") == Polygon(((0.0, 0.0), (2.0, 0.0), (0.0, 2.0)))


@pytest.mark.parametrize("text", ["box:1,0,0,1", "ball:0,0,-1", "polygon:0,0,1,1,2,2", "disk:0,0,1", "box:1,2,3"])
def test_parse_domain_rejects(text):
    with pytest.raises((DomainError, ValueError)):
        parse_domain(text)


def test_polygon_orientation_and_convexity():
    with pytest.raises(ValueError):
        Polygon(((0.0, 0.0), (0.0, 1.0), (1.0, 0.0)))  # clockwise
    with pytest.raises(ValueError):
        Polygon(((0, 0), (2, 0), (1, 0.2), (2, 2), (0, 2)))  # reflex vertex


@given(st.sampled_from([SQUARE, DISK, HEXAGON]), st.lists(st.floats(-1.5, 1.5), min_size=2, max_size=2))
def test_open_membership_implies_closed(spec, x):
    x = np.array(x)
    if contains(spec, x):
        assert contains_closure(spec, x)


def test_signed_distance_exact_inside():
    assert HEXAGON.signed_distance(np.zeros(2)) == pytest.approx(-np.cos(np.pi / 6), abs=1e-12)
    assert SQUARE.signed_distance(np.array([0.25, 0.5])) == pytest.approx(-0.5)
    assert DISK.signed_distance(np.array([0.3, 0.4])) == pytest.approx(-0.5)
