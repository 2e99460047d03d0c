import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from newtonian_lab.curves import CurveFamily, family_from_paths, family_matrix, random_walk_curve
from newtonian_lab.modulus import (
    DisconnectedTerminals,
    edge_family,
    minimal_upper_gradient_edge,
    minimal_upper_gradient_vertex,
    modulus_connecting,
    p_modulus,
    separation_oracle,
    solve_covering_program,
)
from newtonian_lab.space import from_points, generate_space, path_graph, weighted_graph, with_adjacency

from oracles import dual_grid_search


def single_path(length, segments=4):
    return path_graph([length / segments] * segments)


def test_empty_family():
    s = path_graph([1, 1])
    assert p_modulus(s, CurveFamily(()), 2).value == 0


@pytest.mark.parametrize("ell, p", [(2, 2), (2, 3), (0.5, 2), (2, 1.5), (3, 1)])
def test_single_curve_closed_form(ell, p):
    s = single_path(ell)
    fam = family_from_paths(s, [list(range(s.n))])
    sol = p_modulus(s, fam, p)
    assert sol.converged
    assert sol.value == pytest.approx(ell ** (1 - p), rel=1e-6)
    if p > 1:
        np.testing.assert_allclose(sol.density, 1 / ell, rtol=1e-6)


def test_disjoint_additivity():
    # two length-2 paths joined by a bridge that neither curve uses
    s = weighted_graph(
        [(0, 1, 1), (1, 2, 1), (3, 4, 1), (4, 5, 1), (2, 3, 1)],
        weights=[0.5, 1, 0.5, 0.5, 1, 0.5],
    )
    fam = family_from_paths(s, [[0, 1, 2], [3, 4, 5]])
    assert p_modulus(s, fam, 2).value == pytest.approx(1.0, rel=1e-6)


def _random_family(s, rng, size):
    curves = [random_walk_curve(s, rng, int(rng.integers(2, 6))) for _ in range(size)]
    return CurveFamily(tuple(curves))


def test_monotone_and_subadditive():
    s = generate_space("grid2d", nx=4, ny=4)
    rng = np.random.default_rng(0)
    for _ in range(100):
        p = float(rng.choice([1.5, 2.0, 3.0]))
        f1 = _random_family(s, rng, int(rng.integers(1, 4)))
        f2 = _random_family(s, rng, int(rng.integers(1, 4)))
        m1, m2 = p_modulus(s, f1, p).value, p_modulus(s, f2, p).value
        m12 = p_modulus(s, f1.union(f2), p).value
        assert m12 >= max(m1, m2) * (1 - 1e-6)
        assert m12 <= (m1 + m2) * (1 + 1e-6)


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    n=st.integers(3, 6),
    curves=st.integers(1, 3),
    p=st.sampled_from([1.5, 2.0, 3.0]),
)
@example(seed=256, n=3, curves=2, p=1.5)  # near-zero trapezoid weight, large multiplier
def test_agrees_with_brute_force_dual(seed, n, curves, p):
    rng = np.random.default_rng(seed)
    pts = np.sort(rng.uniform(0, 3, n))
    s = with_adjacency(from_points(pts, weights=rng.uniform(0.2, 2, n)), 10.0)
    fam = CurveFamily(tuple(random_walk_curve(s, rng, int(rng.integers(1, 4))) for _ in range(curves)))
    sol = p_modulus(s, fam, p)
    A = family_matrix(fam, s.n).toarray()
    ref = dual_grid_search(A, np.ones(curves), s.weights, p)
    assert sol.value == pytest.approx(ref, rel=1e-4)
    assert sol.min_curve_integral >= 1 - 1e-8


def test_solver_certificate_on_random_programs():
    rng = np.random.default_rng(5)
    for _ in range(30):
        m, n = rng.integers(1, 8), rng.integers(2, 10)
        A = rng.uniform(0, 1, (m, n)) * (rng.uniform(size=(m, n)) < 0.6)
        A[np.arange(m), rng.integers(0, n, m)] += 0.1
        b = rng.uniform(0.1, 2, m)
        w = rng.uniform(0.5, 2, n)
        p = float(rng.uniform(1.2, 4))
        res = solve_covering_program(A, b, w, p)
        assert res.converged
        assert np.all(A @ res.x >= b * (1 - 1e-8))
        assert res.dual_value <= res.value + 1e-9
        assert res.gap <= 1e-6 * max(1.0, res.value)


def test_edge_oracle():
    s = path_graph([1, 1], weights="unit")
    sol = minimal_upper_gradient_edge(s, np.array([0.0, 1, 2]))
    np.testing.assert_allclose(sol.g, [1, 1])
    assert np.all(minimal_upper_gradient_edge(s, np.ones(3)).g == 0)
    star = weighted_graph([(0, i, float(i)) for i in range(1, 5)])
    np.testing.assert_allclose(minimal_upper_gradient_edge(star, star.dist[0]).g, 1)


def test_vertex_gradient_closed_form():
    s = weighted_graph([(0, 1, 1), (1, 2, 1)])
    sol = minimal_upper_gradient_vertex(s, np.array([0.0, 1, 2]), 2, edge_family(s))
    np.testing.assert_allclose(sol.g, [2 / 3, 4 / 3, 2 / 3], atol=1e-6)
    assert sol.objective**2 == pytest.approx(8 / 3, abs=1e-6)
    A = family_matrix(edge_family(s), 3).toarray()
    assert dual_grid_search(A, np.ones(2), s.weights, 2) == pytest.approx(8 / 3, rel=1e-4)


def test_vertex_gradient_constant_and_monotone():
    s = generate_space("grid2d", nx=3, ny=3)
    u = s.coords[:, 0] ** 2 + s.coords[:, 1]
    assert minimal_upper_gradient_vertex(s, np.ones(9), 2, edge_family(s)).objective == pytest.approx(0, abs=1e-12)
    base = minimal_upper_gradient_vertex(s, u, 2, edge_family(s)).objective
    bigger = edge_family(s).union(family_from_paths(s, [[0, 1, 2, 5, 8], [0, 3, 6, 7, 8]]))
    assert minimal_upper_gradient_vertex(s, u, 2, bigger).objective >= base * (1 - 1e-9)
    with pytest.raises(ValueError):
        minimal_upper_gradient_vertex(s, u, 2, family_from_paths(s, [[0, 1]]))


def test_separation_oracle():
    s = path_graph([1, 1, 1])
    r = separation_oracle(s, np.ones(4), ([0], [3]))
    assert r.curve.vertices == (0, 1, 2, 3) and r.integral == pytest.approx(3)
    sol = p_modulus(s, family_from_paths(s, [[0, 1, 2, 3]]), 2)
    assert separation_oracle(s, sol.density, ([0], [3])).integral >= 1 - 1e-8


def test_connecting_modulus_and_disconnected_terminals():
    s = generate_space("grid2d", nx=3, ny=3)
    sol, fam = modulus_connecting(s, ([0, 3, 6], [2, 5, 8]), 2)
    assert sol.converged and sol.certificate["separation_integral"] >= 1 - 1e-8
    gap = with_adjacency(from_points(np.array([0.0, 1, 5, 6])), 1.5)
    with pytest.raises(DisconnectedTerminals):
        modulus_connecting(gap, ([0], [3]), 2)
