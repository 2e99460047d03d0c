import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newtonian_lab.covering import build_cover, get_cover
from newtonian_lab.gradient import S_k, T_k, find_plateau, norm_star, product_norm, tk_lp_norm
from newtonian_lab.modulus import minimal_upper_gradient_edge
from newtonian_lab.space import generate_space


def test_S_k_constant(grid256):
    c = get_cover(grid256, 3)
    np.testing.assert_allclose(S_k(np.full(256, 2.5), c), 2.5)


def test_S_k_three_point_line(line3, u_line3):
    np.testing.assert_allclose(S_k(u_line3, build_cover(line3, 0)), [0.3, 0.3, 0.6])


def test_S_k_converges_for_lipschitz(grid256):
    u = np.sin(3 * grid256.coords[:, 0])
    for k in range(0, 7):
        err = np.abs(S_k(u, get_cover(grid256, k)) - u).max()
        assert err <= 3 * 2.0 ** (-k + 1)


def test_T_k_three_point_line(line3, u_line3):
    t = T_k(u_line3, build_cover(line3, 0), 1)
    np.testing.assert_allclose(t.vectors[0], [-0.3, -0.6])
    np.testing.assert_allclose(t.vectors[2], [0.3, -0.3])
    np.testing.assert_allclose(t.pointwise_norm, [0.9, 0.9, 0.6])


def test_T_k_constant(grid256):
    t = T_k(np.ones(256), get_cover(grid256, 4), 2)
    assert np.all(t.pointwise_norm == 0)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 1000), k=st.integers(0, 3))
def test_T_k_linear(a, b, seed, k):
    s = generate_space("grid1d", n=64)
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=(2, 64))
    c = get_cover(s, k)
    lhs = T_k(a * u + b * v, c, 2).vectors
    rhs = a * T_k(u, c, 2).vectors + b * T_k(v, c, 2).vectors
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_norm_star_constant():
    s = generate_space("grid1d", n=64)
    rep = norm_star(np.full(64, -1.5), s, 2)
    assert rep.norm_star == pytest.approx(1.5)
    assert rep.limsup_estimate == 0


def test_norm_star_linear_within_bounds():
    s = generate_space("grid1d", n=1024)
    u = s.coords[:, 0]
    g = minimal_upper_gradient_edge(s, u, 2).g_vertex
    gn = s.lp_norm(g, 2)
    assert gn == pytest.approx(1.0, rel=1e-9)
    rep = norm_star(u, s, 2, (2, 8), 3)
    assert 0.25 * gn <= rep.limsup_estimate < np.inf
    assert rep.limsup_estimate >= rep.liminf_estimate


@settings(max_examples=10, deadline=None)
@given(a=st.floats(-4, 4).filter(lambda a: abs(a) > 1e-3), seed=st.integers(0, 100))
def test_norm_star_homogeneous(a, seed):
    s = generate_space("grid1d", n=128)
    u = np.random.default_rng(seed).normal(size=128)
    r1 = norm_star(u, s, 2, (1, 4), 2)
    r2 = norm_star(a * u, s, 2, (1, 4), 2)
    assert r2.norm_star == pytest.approx(abs(a) * r1.norm_star, rel=1e-9)


def test_product_norm_batched_matches_single(grid256):
    c = get_cover(grid256, 3)
    U = np.random.default_rng(0).normal(size=(4, 256))
    batch = product_norm(U.T, c, 2)
    single = [product_norm(u, c, 2) for u in U]
    np.testing.assert_allclose(batch, single)
    # the product norm combines the L^p norms of u and of T_k u
    u = U[0]
    expect = (grid256.lp_norm(u, 2) ** 2 + tk_lp_norm(u, c, 2) ** 2) ** 0.5
    assert single[0] == pytest.approx(expect)


def test_plateau():
    assert find_plateau([(1, 1.0), (2, 5.0), (3, 5.1), (4, 5.2)], tol=0.1) == (2, 4)
