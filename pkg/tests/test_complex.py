import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from countcurv.complex import (ball_report, build_complex, count_distance, from_csr,
                               geodesic_path, layer_masses, weighted_ball_mass)
from countcurv.errors import (AsymmetricAdjacency, DegreeBoundExceeded, InvalidCell,
                              NonPositiveWeight, SelfLoop, Unreachable, WeightsMissing)
from countcurv.lattice import LatticeSpec, generate_l1_lattice

from conftest import grid_lists


def test_path_degrees():
    cx = build_complex([[1], [0]])
    assert cx.degrees.tolist() == [1, 1]


def test_grid_interior_degree(grid3):
    assert grid3.degrees[4] == 4
    assert sorted(grid3.neighbors(4).tolist()) == [1, 3, 5, 7]


def test_strict_asymmetric_raises():
    with pytest.raises(AsymmetricAdjacency):
        build_complex([[1], []])


def test_lenient_symmetrizes():
    cx = build_complex([[1], []], strict=False)
    assert cx.neighbors(1).tolist() == [0]


def test_self_loop_and_weights():
    with pytest.raises(SelfLoop):
        build_complex([[0]])
    with pytest.raises(NonPositiveWeight):
        build_complex([[1], [0]], weights=[1.0, 0.0])


def test_degree_bound():
    star = [[1, 2, 3]] + [[0]] * 3
    with pytest.raises(DegreeBoundExceeded):
        build_complex(star, degree_bound=2)


def test_path_distance():
    cx = build_complex([[1], [0, 2], [1]])
    assert count_distance(cx, 0, 2) == 2


def test_lattice_distance(z2):
    spec, cx = z2
    o = spec.index_of((0, 0))
    assert count_distance(cx, o, spec.index_of((2, 3))) == 5


def test_unreachable_and_invalid():
    cx = build_complex([[], []])
    with pytest.raises(Unreachable):
        count_distance(cx, 0, 1)
    with pytest.raises(InvalidCell):
        count_distance(cx, 0, 5)


def test_ball_reports(z2, z3):
    spec, cx = z2
    rep = ball_report(cx, spec.index_of((0, 0)), 3)
    assert rep.sphere_counts == (1, 4, 8, 12) and rep.ball_count == 25
    spec3, cx3 = z3
    rep = ball_report(cx3, spec3.index_of((0, 0, 0)), 2)
    assert rep.sphere_counts == (1, 6, 18) and rep.ball_count == 25


def test_isolated_cell():
    cx = build_complex([[]])
    rep = ball_report(cx, 0, 5)
    assert rep.sphere_counts == (1, 0, 0, 0, 0, 0)


def test_members_sorted(grid3):
    rep = ball_report(grid3, 4, 1, keep_members=True)
    assert rep.members == ((4, 0), (1, 1), (3, 1), (5, 1), (7, 1))


def test_weighted_mass(z2):
    spec, cx = z2
    o = spec.index_of((0, 0))
    w1 = from_csr(cx.indptr, cx.indices, weights=np.ones(cx.cell_count), validate=False)
    w2 = from_csr(cx.indptr, cx.indices, weights=np.full(cx.cell_count, 0.5), validate=False)
    assert weighted_ball_mass(w1, o, 3) == 25.0
    assert weighted_ball_mass(w2, o, 3) == 12.5
    bare = from_csr(cx.indptr, cx.indices, validate=False)
    with pytest.raises(WeightsMissing):
        weighted_ball_mass(bare, o, 3)


def test_layer_masses_match_counts(z2):
    spec, cx = z2
    o = spec.index_of((0, 0))
    assert layer_masses(cx, o, 4, use_weights=False).tolist() == [1, 4, 8, 12, 16]


def test_geodesic_path_is_minimal(z2):
    spec, cx = z2
    u, v = spec.index_of((-3, 1)), spec.index_of((2, -2))
    path = geodesic_path(cx, u, v)
    assert path[0] == u and path[-1] == v
    assert len(path) - 1 == count_distance(cx, u, v) == 8
    for a, b in zip(path, path[1:]):
        assert b in cx.neighbors(a)


def test_layers_consistent(z2):
    spec, cx = z2
    o = spec.index_of((1, -1))
    layers = cx.layers(o, 4)
    for k, layer in enumerate(layers):
        for c in layer:
            assert count_distance(cx, o, int(c)) == k


@st.composite
def random_graphs(draw):
    n = draw(st.integers(2, 14))
    edges = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=30))
    lists = [set() for _ in range(n)]
    for a, b in edges:
        if a != b:
            lists[a].add(b)
            lists[b].add(a)
    return build_complex([sorted(s) for s in lists])


@settings(max_examples=60, deadline=None)
@given(random_graphs(), st.data())
def test_metric_axioms(cx, data):
    n = cx.cell_count
    u, v, w = (data.draw(st.integers(0, n - 1)) for _ in range(3))
    D = [cx.bfs(i) for i in range(n)]
    assert D[u][u] == 0
    assert D[u][v] == D[v][u]
    if D[u][v] >= 0 and D[v][w] >= 0:
        assert 0 <= D[u][w] <= D[u][v] + D[v][w]
    if u != v and D[u][v] >= 0:
        assert D[u][v] > 0


def test_grid_lists_lattice_agree():
    cx = build_complex(grid_lists(5))
    lat = generate_l1_lattice(LatticeSpec(2, 2))
    assert sorted(cx.degrees.tolist()) == sorted(lat.degrees.tolist())
