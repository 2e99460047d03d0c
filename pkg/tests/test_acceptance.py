"""Acceptance criteria. Each test prints one ``criterion N: PASS|FAIL`` line,
and the lines are repeated in the terminal summary."""

import importlib.util
import math
import os
import re
import time

import numpy as np
import pytest

from newtonian_lab import experiments as ex
from newtonian_lab.covering import admissible_window, get_cover, neighbor_cap, validate_cover
from newtonian_lab.curves import CurveFamily, family_from_paths, family_matrix, random_walk_curve
from newtonian_lab.measure import estimate_doubling
from newtonian_lab.modulus import edge_family, minimal_upper_gradient_edge, minimal_upper_gradient_vertex, p_modulus
from newtonian_lab.space import from_points, generate_space, path_graph, weighted_graph, with_adjacency

from conftest import CRITERIA
from oracles import dual_grid_search

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    CRITERIA[n] = line
    print(line)


def test_criterion_1_cover_validity():
    t = time.perf_counter()
    spaces = [
        generate_space("grid1d", n=256),
        generate_space("grid2d", nx=32, ny=32),
        generate_space("circle", n=256),
    ]
    ok, notes = True, []
    for s in spaces:
        cap = neighbor_cap(estimate_doubling(s, with_covers=False).C_d_estimate)
        lo, hi = admissible_window(s)
        Ns = []
        for k in range(lo, hi + 1):
            rep = validate_cover(get_cover(s, k))
            ok &= rep.ok
            Ns.append(get_cover(s, k).N_k)
        ok &= max(Ns) <= cap
        notes.append(f"{s.name} k={lo}..{hi} N_k<={max(Ns)} cap {cap}")
    dt = time.perf_counter() - t
    ok &= dt < 30
    record(1, ok, "; ".join(notes) + f"; {dt:.1f}s")
    assert ok


def test_criterion_2_discrete_curve_estimate():
    t = time.perf_counter()
    rep = ex.almostug_experiment(trials=10_000, seed=0)
    dt = time.perf_counter() - t
    ok = rep.trials >= 10_000 and rep.violations == 0 and rep.min_slack >= -1e-9 and dt < 60
    record(2, ok, f"{rep.trials} trials, {rep.violations} violations, min slack {rep.min_slack:.3g}, {dt:.1f}s")
    assert ok


def test_criterion_3_tk_bound():
    s = generate_space("grid1d", n=512)
    rep = ex.tk_poincare_bound_check(s, s.coords[:, 0], np.ones(s.n), 2)
    ok = rep.violations == 0
    record(3, ok, f"c_PI {rep.c_PI:.4g}, C {rep.C:.4g}, {rep.violations} violations over k={rep.per_k[0]['k']}..{rep.per_k[-1]['k']}")
    assert ok


def test_criterion_4_lower_constant():
    t = time.perf_counter()
    s = generate_space("grid1d", n=1024)
    x = s.coords[:, 0]
    funcs = {"x": x, "|x-1/2|": np.abs(x - 0.5), "sin 2pi x": np.sin(2 * np.pi * x)}
    ok, worst = True, math.inf
    for name, u in funcs.items():
        for p in (1.0, 1.5, 2.0, 3.0):
            rep = ex.equivalence_experiment(s, u, p, (2, 8), 3, label=name)
            ok &= rep.limsup_estimate >= 0.25 * 0.9 * rep.g_norm and math.isfinite(rep.upper_ratio)
            worst = min(worst, rep.lower_ratio)
    dt = time.perf_counter() - t
    ok &= dt < 120
    record(4, ok, f"12 cases, smallest lower ratio {worst:.3f} vs 0.225, {dt:.1f}s")
    assert ok


def test_criterion_5_pointwise():
    s = generate_space("grid1d", n=1024)
    rep = ex.pointwise_experiment(s, s.coords[:, 0], 1.5, 2)
    ok = rep.pass_ratio and rep.domination_fraction == 1.0
    record(
        5,
        ok,
        f"l1 ratio C {rep.l1.C_measured:.3f} ({100 * rep.l1.fraction_within:.1f}% within 10), "
        f"lp ratio C {rep.lp.C_measured:.3f}, domination {100 * rep.domination_fraction:.0f}% "
        f"with constant {rep.domination_constant:.4g}",
    )
    assert ok


def test_criterion_6_modulus():
    notes, ok = [], True
    for ell, p in ((2, 2), (2, 3), (0.5, 2)):
        s = path_graph([ell / 4] * 4)
        v = p_modulus(s, family_from_paths(s, [list(range(5))]), p).value
        ok &= abs(v / ell ** (1 - p) - 1) <= 1e-6
    s = weighted_graph([(0, 1, 1), (1, 2, 1), (3, 4, 1), (4, 5, 1), (2, 3, 1)], weights=[0.5, 1, 0.5, 0.5, 1, 0.5])
    ok &= abs(p_modulus(s, family_from_paths(s, [[0, 1, 2], [3, 4, 5]]), 2).value - 1.0) <= 1e-6
    notes.append("closed forms and additivity")

    g = generate_space("grid2d", nx=4, ny=4)
    rng = np.random.default_rng(0)
    bad = 0
    for _ in range(100):
        p = float(rng.choice([1.5, 2.0, 3.0]))
        f1 = CurveFamily(tuple(random_walk_curve(g, rng, int(rng.integers(2, 6))) for _ in range(int(rng.integers(1, 4)))))
        f2 = CurveFamily(tuple(random_walk_curve(g, rng, int(rng.integers(2, 6))) for _ in range(int(rng.integers(1, 4)))))
        m1, m2, m12 = (p_modulus(g, f, p).value for f in (f1, f2, f1.union(f2)))
        bad += not (max(m1, m2) * (1 - 1e-6) <= m12 <= (m1 + m2) * (1 + 1e-6))
    ok &= bad == 0
    notes.append(f"{bad} monotonicity/subadditivity failures in 100 pairs")

    worst = 0.0
    for seed in range(20):
        r = np.random.default_rng(seed)
        n = int(r.integers(3, 7))
        sp = with_adjacency(from_points(np.sort(r.uniform(0, 3, n)), weights=r.uniform(0.2, 2, n)), 10.0)
        fam = CurveFamily(tuple(random_walk_curve(sp, r, int(r.integers(1, 4))) for _ in range(int(r.integers(1, 4)))))
        p = float(r.choice([1.5, 2.0, 3.0]))
        ref = dual_grid_search(family_matrix(fam, sp.n).toarray(), np.ones(len(fam)), sp.weights, p)
        worst = max(worst, abs(p_modulus(sp, fam, p).value / ref - 1))
    ok &= worst <= 1e-4
    notes.append(f"brute-force max rel err {worst:.1e}")
    record(6, ok, "; ".join(notes))
    assert ok


def test_criterion_7_vertex_gradient():
    s = weighted_graph([(0, 1, 1), (1, 2, 1)])
    sol = minimal_upper_gradient_vertex(s, np.array([0.0, 1, 2]), 2, edge_family(s))
    err = max(np.abs(sol.g - [2 / 3, 4 / 3, 2 / 3]).max(), abs(sol.objective**2 - 8 / 3))
    ok = err <= 1e-6
    record(7, ok, f"g = {np.round(sol.g, 9).tolist()}, objective^2 = {sol.objective**2:.9f}")
    assert ok


def test_criterion_8_convexity():
    s = generate_space("grid1d", n=256)
    r2 = ex.convexity_probe(s, 2.0, 3, 10_000, seed=0)
    r1 = ex.convexity_probe(s, 1.0, 3, 1_000, seed=0)
    mid = r1.disjoint_pair["midpoint"]
    ok = r2.sample_count >= 10_000 and not r2.counterexamples and mid >= 1 - 1e-12
    record(8, ok, f"p=2: {len(r2.counterexamples)} counterexamples in {r2.sample_count} pairs; p=1 midpoint {mid:.15f}")
    assert ok


def _load_suite():
    spec = importlib.util.spec_from_file_location("run_suite", os.path.join(ROOT, "scripts", "run_suite.py"))
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


_TS = re.compile(rb'^\s*"timestamp": "[^"]*",?\n', re.M)


def test_criterion_9_determinism(tmp_path):
    suite = _load_suite()
    suite.run(str(tmp_path / "a"), seed=0, verbose=False)
    suite.run(str(tmp_path / "b"), seed=0, verbose=False)
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.json"))
    differ = []
    for f in files:
        a = _TS.sub(b"", (tmp_path / "a" / f).read_bytes())
        b = _TS.sub(b"", (tmp_path / "b" / f).read_bytes())
        if a != b:
            differ.append(str(f))
    ok = len(files) >= len(suite.SUITE) and not differ
    record(9, ok, f"{len(files)} reports compared, {len(differ)} differ")
    assert ok
