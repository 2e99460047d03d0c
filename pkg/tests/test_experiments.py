import math

import numpy as np
import pytest

from newtonian_lab import experiments as ex
from newtonian_lab.covering import get_cover
from newtonian_lab.space import from_points, generate_space


@pytest.fixture(scope="module")
def grid256():
    return generate_space("grid1d", n=256)


# -- Poincare -----------------------------------------------------------------------


def test_poincare_constant_u(grid256):
    rep = ex.poincare_sweep(grid256, np.ones(256), np.random.default_rng(0).uniform(size=256), 2)
    assert rep.c_PI_estimate == 0
    assert all(lhs == 0 for _, _, lhs, _ in rep.per_ball)


def test_poincare_linear_stable_over_admissible_radii(grid256):
    x = grid256.coords[:, 0]
    lo, hi = ex.admissible_window(grid256)
    radii = [2.0**-k for k in range(lo, hi + 1)]
    rep = ex.poincare_sweep(grid256, x, np.ones(256), 2, 2.0, radii=radii)
    vals = np.array(list(rep.per_radius.values()))
    assert math.isfinite(rep.c_PI_estimate)
    ref = np.median(vals)
    assert np.all(np.abs(vals / ref - 1) <= 0.2)


def test_poincare_zero_gradient_is_unbounded(grid256):
    rep = ex.poincare_sweep(grid256, grid256.coords[:, 0], np.zeros(256), 2)
    assert rep.c_PI_estimate == math.inf and not rep.passed
    assert all(rhs == 0 for _, _, _, rhs in rep.per_ball)
    assert rep.to_json()["c_PI_estimate"] == "inf"


# -- T_k bound ----------------------------------------------------------------------


def test_tk_bound_cases():
    s = generate_space("grid1d", n=128)
    x = s.coords[:, 0]
    assert ex.tk_poincare_bound_check(s, np.ones(128), np.ones(128), 2).passed
    assert ex.tk_poincare_bound_check(s, x, np.ones(128), 2).passed
    bad = ex.tk_poincare_bound_check(s, x, np.zeros(128), 2)
    assert not bad.passed and bad.violations > 0


# -- equivalence ------------------------------------------------------------------------


def test_equivalence_constant_is_vacuous():
    s = generate_space("grid1d", n=64)
    rep = ex.equivalence_experiment(s, np.full(64, 3.0), 2)
    assert rep.passed and rep.g_norm == 0


def test_equivalence_linear():
    s = generate_space("grid1d", n=1024)
    rep = ex.equivalence_experiment(s, s.coords[:, 0], 2, (2, 8), 3)
    assert rep.g_norm == pytest.approx(1.0)
    assert rep.lower_ratio >= 0.25 * 0.9 and rep.passed
    assert math.isfinite(rep.upper_ratio)


# -- pointwise --------------------------------------------------------------------------


def test_pointwise_constant_all_vacuous():
    s = generate_space("grid1d", n=16)
    rep = ex.pointwise_experiment(s, np.ones(16), 1.5, 2, None, 2, interior_margin=0.0)
    assert rep.passed and rep.l1.vacuous == 16 and rep.l1.counted == 0


def test_pointwise_jump_localised():
    s = generate_space("grid1d", n=16)
    u = (np.arange(16) >= 8).astype(float)
    rep = ex.pointwise_experiment(s, u, 1.5, 2, None, 2, interior_margin=0.0)
    assert 7 not in rep.l1.failures and 8 not in rep.l1.failures
    jump = {7, 8}
    # a failing point sees the jump through its own ball or a neighbour ball
    for x in rep.l1.failures:
        seen = False
        for k in rep.trailing_ks:
            c = get_cover(s, k)
            i = c.cell_of[x]
            balls = [i, *c.neighbor_lists[i].tolist()]
            seen |= any(jump & set(c.members[j].tolist()) for j in balls)
        assert seen
    assert rep.pass_domination


def test_pointwise_rejects_bad_q():
    s = generate_space("grid1d", n=16)
    with pytest.raises(ValueError):
        ex.pointwise_experiment(s, np.ones(16), 2.5, 2)


# -- convexity --------------------------------------------------------------------------


def test_lp_modulus_values():
    assert ex.lp_modulus(2, math.sqrt(2)) == pytest.approx(1 - math.sqrt(0.5))
    assert ex.lp_modulus(1, 1.0) == 0
    assert ex.lp_modulus(3, 0) == 0
    # Hanner branch is increasing in eps and below the p = 2 value
    vals = [ex.lp_modulus(1.5, e) for e in (0.5, 1.0, 1.5)]
    assert vals == sorted(vals) and vals[-1] < ex.lp_modulus(2, 1.5)


def test_orthogonal_pair_p2():
    s = generate_space("grid1d", n=64)
    pair = ex.disjoint_pair(s, get_cover(s, 3), 2)
    assert pair["phi_u"] == pytest.approx(1) and pair["phi_v"] == pytest.approx(1)
    assert pair["phi_diff"] == pytest.approx(math.sqrt(2))
    assert pair["midpoint"] == pytest.approx(math.sqrt(2) / 2)


def test_p1_two_cell_space():
    s = from_points(np.array([0.0, 10.0]))
    pair = ex.disjoint_pair(s, get_cover(s, 0), 1)
    assert pair["midpoint"] == pytest.approx(1.0, abs=1e-12)


def test_convexity_small_probe():
    s = generate_space("grid1d", n=64)
    rep = ex.convexity_probe(s, 1.5, 2, 2000, seed=1)
    assert rep.passed and rep.counterexamples == []
    rep1 = ex.convexity_probe(s, 1.0, 2, 200, seed=1)
    assert rep1.passed


def test_convexity_equal_pair_never_counterexample():
    s = generate_space("grid1d", n=32)
    cover = get_cover(s, 2)
    u = np.random.default_rng(0).normal(size=32)
    u /= ex.product_norm(u, cover, 2)
    assert ex.product_norm(u + u, cover, 2) / 2 == pytest.approx(1.0)
    # eps > 0 excludes the pair, since its difference has norm 0
    assert ex.product_norm(u - u, cover, 2) == 0


# -- cross cover --------------------------------------------------------------------------


def test_cross_cover_cases():
    s = generate_space("grid1d", n=128)
    assert ex.cross_cover_experiment(s, np.ones(128), 2).spread == 0
    one = ex.cross_cover_experiment(from_points(np.array([0.0])), np.ones(1), 2)
    assert one.spread == 0 and one.passed
    with pytest.raises(ValueError):
        ex.cross_cover_experiment(s, np.ones(128), 2, seeds=[0])


# -- discrete curve estimate --------------------------------------------------------------


def test_almostug_small_run():
    rep = ex.almostug_experiment(trials=300, seed=3)
    assert rep.trials >= 300 and rep.violations == 0
    assert set(rep.per_space) == {"grid1d(256)", "grid2d(32,32)", "circle(256,1)"}
