import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newtonian_lab.functions import evaluate, named, resolve
from newtonian_lab.io import load_space, open_space, parse_generator, save_space
from newtonian_lab.measure import (
    ball,
    ball_average,
    doubling_ratio,
    estimate_doubling,
    lip_estimate,
    maximal_function,
)
from newtonian_lab.space import SpaceError, dyadic_ladder, from_matrix, from_points, generate_space, path_graph

from oracles import brute_ball, brute_maximal


# -- loading ------------------------------------------------------------------


def _write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def test_load_three_collinear_points(tmp_path):
    path = _write(
        tmp_path,
        "line.json",
        {"mode": "euclidean", "points": [{"id": i, "coord": [x], "weight": 1} for i, x in enumerate([0, 0.6, 1.2])]},
    )
    s = load_space(path)
    assert s.n == 3
    assert s.total_mass == 3


def test_load_graph_mode_uses_shortest_paths(tmp_path):
    path = _write(
        tmp_path,
        "g.json",
        {
            "mode": "graph-shortest-path",
            "points": [{"id": i, "weight": 1} for i in range(3)],
            "edges": [{"a": 0, "b": 1, "len": 1}, {"a": 1, "b": 2, "len": 1}],
        },
    )
    assert load_space(path).dist[0, 2] == 2


def test_matrix_triangle_violation(tmp_path):
    path = _write(
        tmp_path,
        "m.json",
        {
            "mode": "explicit-matrix",
            "points": [{"id": c, "weight": 1} for c in "abc"],
            "matrix": [[0, 1, 3], [1, 0, 1], [3, 1, 0]],
        },
    )
    with pytest.raises(SpaceError, match="triangle"):
        load_space(path)


@pytest.mark.parametrize(
    "data, msg",
    [
        ({"mode": "euclidean", "points": [{"id": 0, "coord": [0], "weight": 0}]}, "positive"),
        ({"mode": "euclidean", "points": [{"id": 0, "coord": [0]}, {"id": 0, "coord": [1]}]}, "duplicate"),
        ({"mode": "nonsense", "points": []}, "mode"),
    ],
)
def test_load_rejects_bad_input(tmp_path, data, msg):
    with pytest.raises(SpaceError, match=msg):
        load_space(_write(tmp_path, "bad.json", data))


def test_unparsable_file(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    with pytest.raises(SpaceError, match="parse failure"):
        load_space(str(p))


def test_csv_point_cloud(tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("x1,x2,weight\n0,0,1\n3,4,2\n")
    s = load_space(str(p))
    assert s.dist[0, 1] == pytest.approx(5.0)
    assert s.total_mass == 3


def test_roundtrip(tmp_path):
    s = generate_space("circle", n=12)
    save_space(s, str(tmp_path / "c.json"))
    t = load_space(str(tmp_path / "c.json"))
    np.testing.assert_allclose(t.dist, s.dist, atol=1e-12)
    np.testing.assert_allclose(t.weights, s.weights)


def test_disconnected_graph_rejected():
    from newtonian_lab.space import weighted_graph

    with pytest.raises(SpaceError, match="disconnected"):
        weighted_graph([(0, 1, 1.0), (2, 3, 1.0)], n=4)


# -- generators -----------------------------------------------------------------


def test_grid1d_two_points():
    s = generate_space("grid1d", n=2)
    np.testing.assert_allclose(s.coords.ravel(), [0, 1])
    np.testing.assert_allclose(s.weights, [0.5, 0.5])


def test_circle_distances_are_quarter_turns():
    s = generate_space("circle", n=4, radius=1)
    q = s.dist / (math.pi / 2)
    np.testing.assert_allclose(q, np.round(q), atol=1e-12)
    assert q.max() == pytest.approx(2)


def test_grid2d_euclidean():
    s = generate_space("grid2d", nx=4, ny=4)
    assert s.n == 16
    assert s.dist[0, 15] == pytest.approx(math.sqrt(2))


def test_generator_spec_parsing():
    assert parse_generator("grid2d:nx=3,ny=5").n == 15
    assert open_space("circle:n=8,radius=2").diameter == pytest.approx(2 * math.pi)
    with pytest.raises(SpaceError):
        parse_generator("torus:n=3")


def test_dyadic_ladder_within_scales():
    s = generate_space("grid1d", n=9)
    lad = dyadic_ladder(s)
    assert lad.max() <= s.diameter and lad.min() >= s.resolution
    np.testing.assert_allclose(lad, [1, 0.5, 0.25, 0.125])


# -- balls and averages -----------------------------------------------------------


def test_ball_three_point_line(line3):
    assert ball(line3, 0, 1.0).tolist() == [0, 1]
    assert ball(line3, 1, 0).tolist() == [1]
    assert ball(generate_space("grid1d", n=2), 0, 2).tolist() == [0, 1]


def test_ball_average_hand_value(line3, u_line3):
    assert ball_average(line3, u_line3, np.array([0, 1])) == pytest.approx(0.3)
    assert ball_average(line3, u_line3, np.array([2])) == pytest.approx(1.2)
    assert ball_average(line3, np.full(3, 7.0), np.array([0, 2])) == pytest.approx(7.0)


@settings(max_examples=40, deadline=None)
@given(
    pts=st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=12),
    r=st.floats(0, 6),
    x=st.integers(0, 11),
)
def test_ball_matches_scan(pts, r, x):
    s = from_points(np.array(pts))
    x %= s.n
    assert set(ball(s, x, r).tolist()) == brute_ball(s.dist, x, r)


# -- doubling -----------------------------------------------------------------------


def test_doubling_single_point():
    assert estimate_doubling(from_points(np.array([0.0]))).C_d_estimate == 1


def test_doubling_two_points():
    assert doubling_ratio(from_points(np.array([0.0, 1.0])), 0, 0.6) == 2


def test_doubling_grid_bound(grid256):
    s = grid256
    # exhaustive reference over the dyadic ladder
    worst = 1.0
    for r in dyadic_ladder(s):
        m1 = (s.dist <= r * (1 + 1e-12)) @ s.weights
        m2 = (s.dist <= 2 * r * (1 + 1e-12)) @ s.weights
        worst = max(worst, float((m2 / m1).max()))
    assert worst <= 4
    assert estimate_doubling(s, with_covers=False).C_d_estimate <= worst + 1e-12


# -- maximal function -----------------------------------------------------------------


def test_maximal_constant(grid256):
    np.testing.assert_allclose(maximal_function(grid256, np.full(256, -3.0)), 3.0)


def test_maximal_indicator_grid4():
    s = generate_space("grid1d", n=4)
    g = np.array([0.0, 1.0, 0.0, 0.0])
    np.testing.assert_allclose(maximal_function(s, g, "exact"), brute_maximal(s.dist, s.weights, g))
    # the default ladder is a subset of radii, so it can only be smaller
    assert np.all(maximal_function(s, g) <= brute_maximal(s.dist, s.weights, g) + 1e-15)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=10))
def test_maximal_dominates_and_matches_scan(vals):
    g = np.array(vals)
    s = generate_space("grid1d", n=g.size)
    M = maximal_function(s, g)
    assert np.all(M >= np.abs(g) - 1e-12)
    np.testing.assert_allclose(maximal_function(s, g, "exact"), brute_maximal(s.dist, s.weights, g), atol=1e-12)


# -- lip ------------------------------------------------------------------------------


def test_lip_constant_is_zero(grid256):
    est = lip_estimate(grid256, np.ones(256), [2.0**-j for j in range(3, 8)])
    np.testing.assert_array_equal(est.values, 0)


def test_lip_linear_near_one(grid256):
    u = grid256.coords[:, 0]
    est = lip_estimate(grid256, u, [2.0**-j for j in range(3, 8)])
    assert est.values.min() >= 0.9 and est.values.max() <= 1.1


@settings(max_examples=20, deadline=None)
@given(L=st.floats(0.1, 5), phase=st.floats(0, 6))
def test_lip_bounded_by_lipschitz_constant(L, phase):
    s = generate_space("grid1d", n=64)
    u = L * np.sin(s.coords[:, 0] + phase)
    est = lip_estimate(s, u, [0.25, 0.125, 0.0625])
    assert est.values.max() <= L + 1e-9


# -- functions ------------------------------------------------------------------------


def test_expression_evaluation():
    s = generate_space("grid2d", nx=3, ny=2)
    np.testing.assert_allclose(evaluate("x + 2*y", s), s.coords[:, 0] + 2 * s.coords[:, 1])
    np.testing.assert_allclose(evaluate("where(x < 0.5, 1, 0)", s), (s.coords[:, 0] < 0.5).astype(float))
    with pytest.raises(ValueError):
        evaluate("__import__('os')", s)


def test_named_and_file_functions(tmp_path):
    s = generate_space("grid1d", n=5)
    np.testing.assert_allclose(named("abs", s), np.abs(s.coords[:, 0] - 0.5))
    (tmp_path / "u.json").write_text(json.dumps({"values": [1, 2, 3, 4, 5]}))
    np.testing.assert_allclose(resolve(str(tmp_path / "u.json"), s), [1, 2, 3, 4, 5])
    (tmp_path / "bad.csv").write_text("1,2\n")
    with pytest.raises(SpaceError):
        resolve(str(tmp_path / "bad.csv"), s)


def test_random_lipschitz_is_lipschitz():
    s = generate_space("grid1d", n=512)
    u = named("random-lipschitz", s, seed=3)
    slopes = np.abs(np.diff(u)) / np.diff(s.coords[:, 0])
    assert slopes.max() <= 2.0 + 1e-9


def test_matrix_space_and_path_graph():
    s = from_matrix(np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]]))
    assert s.diameter == 2
    p = path_graph([1, 2])
    np.testing.assert_allclose(p.weights, [0.5, 1.5, 1.0])
    assert p.dist[0, 2] == 3
