"""End-to-end experiments: Poincare constants, the ``T_k`` bound, norm
equivalence, pointwise comparability, convexity of the product norm,
cover sensitivity and the discrete curve estimate.

Every experiment returns a report with ``to_json()`` and a ``passed`` flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .covering import admissible_window, clip_window, get_cover
from .curves import CurveFamily, check_S_k_inequality, random_walk_curve
from .gradient import norm_star, product_norm, tk_pointwise, ball_components
from .measure import BALL_RTOL, maximal_function
from .modulus import minimal_upper_gradient_edge
from .space import MetricMeasureSpace, generate_space

LOWER_FACTOR = 0.25
LOWER_TOL = 0.10
DEFAULT_LAMBDA = 2.0
EXACT_TOL = 1e-9


def _window(space: MetricMeasureSpace, k_window) -> tuple[int, int]:
    return admissible_window(space) if k_window is None else clip_window(space, tuple(k_window))


def _f(x: float) -> float | str:
    """JSON-safe float."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


# -- Poincare ------------------------------------------------------------------


@dataclass
class PoincareReport:
    p: float
    lam: float
    sampler: str
    per_ball: list[tuple[int, float, float, float]]
    c_PI_estimate: float
    balls_skipped: int
    per_radius: dict[float, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return math.isfinite(self.c_PI_estimate)

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "lambda": self.lam,
            "sampler": self.sampler,
            "c_PI_estimate": _f(self.c_PI_estimate),
            "balls_skipped": self.balls_skipped,
            "per_radius": {repr(r): _f(v) for r, v in sorted(self.per_radius.items(), reverse=True)},
            "per_ball": [[c, r, lhs, _f(rhs)] for c, r, lhs, rhs in self.per_ball],
            "pass": self.passed,
        }


def _ball_diameter(space: MetricMeasureSpace, members: np.ndarray) -> float:
    if members.size <= 1:
        return 0.0
    if space.metric_mode == "euclidean" and space.coords.shape[1] == 1:
        x = space.coords[members, 0]
        return float(x.max() - x.min())
    return float(space.dist[np.ix_(members, members)].max())


def poincare_sweep(
    space: MetricMeasureSpace,
    u: np.ndarray,
    g: np.ndarray,
    p: float,
    lam: float = DEFAULT_LAMBDA,
    sampler: str = "dyadic",
    *,
    k_window: tuple[int, int] | None = None,
    radii: Sequence[float] | None = None,
) -> PoincareReport:
    """Ratios ``avg_B |u - u_B| / (diam(B) (avg_{lam B} g^p)^(1/p))``.

    ``dyadic`` samples every point with every dyadic radius; ``cover``
    samples the cover centers with radius ``5 * 2^-k`` for each generation
    of the window, which are exactly the balls used by the ``T_k`` bound.
    Balls with both sides zero are skipped; a zero right side with a
    positive left side gives an infinite ratio.
    """
    if lam < 1:
        raise ValueError("lambda must be >= 1")
    u = space.check_function(u)
    g = np.abs(space.check_function(g))
    w = space.weights
    groups: list[tuple[float, np.ndarray]] = []
    if sampler == "dyadic":
        from .space import dyadic_ladder

        rs = dyadic_ladder(space) if radii is None else np.asarray(radii, dtype=float)
        groups = [(float(r), np.arange(space.n)) for r in rs]
    elif sampler == "cover":
        lo, hi = _window(space, k_window)
        groups = [(5.0 * 2.0**-k, get_cover(space, k).centers) for k in range(lo, hi + 1)]
    else:
        raise ValueError(f"unknown sampler {sampler!r}")
    if not groups:
        raise ValueError("no admissible balls")
    per_ball = []
    skipped = 0
    per_radius: dict[float, float] = {}
    gp = g**p
    for r, centers in groups:
        d = space.dist[centers]
        inner = d <= r * (1 + BALL_RTOL)
        outer = d <= lam * r * (1 + BALL_RTOL)
        mi = inner @ w
        uB = (inner @ (u * w)) / mi
        lhs = (inner * np.abs(u[None, :] - uB[:, None])) @ w / mi
        gavg = ((outer @ (gp * w)) / (outer @ w)) ** (1.0 / p)
        best = 0.0
        for c, row, a, ga in zip(centers.tolist(), inner, lhs, gavg):
            rhs = _ball_diameter(space, np.flatnonzero(row)) * ga
            if rhs == 0 and a <= 1e-15:
                skipped += 1
                continue
            ratio = a / rhs if rhs > 0 else float("inf")
            best = max(best, ratio)
            per_ball.append((int(c), r, float(a), float(rhs)))
        per_radius[r] = best
    c = max(per_radius.values(), default=0.0)
    return PoincareReport(p, lam, sampler, per_ball, c, skipped, per_radius)


# -- T_k bound -------------------------------------------------------------------


def chaining_ratio(space: MetricMeasureSpace, ks: Sequence[int]) -> float:
    """``max mu(5 B_i) / mu(B_j)`` over balls ``B_i`` and ``B_j`` equal or
    neighbouring, across the generations ``ks``."""
    D = 1.0
    w = space.weights
    for k in ks:
        cov = get_cover(space, k)
        big = (space.dist[cov.centers] <= 5 * cov.radius * (1 + BALL_RTOL)) @ w
        for i, nb in enumerate(cov.neighbor_lists):
            js = np.concatenate([[i], nb]).astype(np.int64)
            D = max(D, float(big[i] / cov.masses[js].min()))
    return D


def _enlarged_average(space: MetricMeasureSpace, cover, values: np.ndarray, factor: float) -> np.ndarray:
    """Per point ``x``: average of ``values`` on ``B(center of B[x], factor * r)``."""
    m = space.dist[cover.centers] <= factor * cover.radius * (1 + BALL_RTOL)
    w = space.weights
    return ((m @ (values * w)) / (m @ w))[cover.cell_of]


def _safe_mul(C: float, v: np.ndarray) -> np.ndarray:
    # inf * 0 := 0; a zero average gives a zero bound
    if math.isinf(C):
        return np.where(v > 0, np.inf, 0.0)
    return C * v


@dataclass
class TkBoundReport:
    p: float
    lam: float
    c_PI: float
    D: float
    C: float
    per_k: list[dict]
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "lambda": self.lam,
            "c_PI": _f(self.c_PI),
            "chaining_ratio": self.D,
            "C": _f(self.C),
            "constant_chain": "C = 2 * 10 * c_PI * max mu(5B)/mu(B_j)",
            "per_k": self.per_k,
            "violations": self.violations,
            "pass": self.passed,
        }


def tk_poincare_bound_check(
    space: MetricMeasureSpace,
    u: np.ndarray,
    g: np.ndarray,
    p: float,
    lam: float = DEFAULT_LAMBDA,
    k_window: tuple[int, int] | None = None,
    c_PI: float | None = None,
) -> TkBoundReport:
    """Check ``|T_k u(x)|_p <= C N_k^(1/p) (avg_{5 lam B[x]} g^p)^(1/p)``.

    Each component obeys ``|u_B - u_{B_j}| <= (mu(5B)/mu(B) + mu(5B)/mu(B_j))
    avg_{5B} |u - u_{5B}|`` and the Poincare inequality on ``5B`` (diameter
    at most ``10 * 2^-k``) bounds the average, so ``C = 20 c_PI D`` with
    ``D`` the measured chaining ratio. ``c_PI`` defaults to the cover
    sampler's estimate, which covers exactly the balls ``5B``.
    """
    u = space.check_function(u)
    g = np.abs(space.check_function(g))
    lo, hi = _window(space, k_window)
    ks = list(range(lo, hi + 1))
    if c_PI is None:
        c_PI = poincare_sweep(space, u, g, p, lam, "cover", k_window=(lo, hi)).c_PI_estimate
    D = chaining_ratio(space, ks)
    C = 20.0 * c_PI * D if c_PI > 0 else 0.0
    per_k = []
    total = 0
    for k in ks:
        cov = get_cover(space, k)
        lhs = tk_pointwise(u, cov, p)
        avg = _enlarged_average(space, cov, g**p, 5 * lam) ** (1.0 / p)
        rhs = _safe_mul(C * max(cov.N_k, 1) ** (1.0 / p), avg)
        bad = lhs > rhs * (1 + EXACT_TOL) + 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))
        total += int(bad.sum())
        per_k.append(
            {
                "k": k,
                "N_k": cov.N_k,
                "max_lhs": float(lhs.max()),
                "max_ratio": _f(ratio.max()),
                "violations": int(bad.sum()),
                "witnesses": np.flatnonzero(bad)[:10].tolist(),
            }
        )
    return TkBoundReport(p, lam, c_PI, D, C, per_k, total)


# -- norm equivalence --------------------------------------------------------------


@dataclass
class EquivalenceReport:
    u: str
    p: float
    g_norm: float
    limsup_estimate: float
    liminf_estimate: float
    lower_ratio: float
    upper_ratio: float
    window: tuple[int, int]
    plateau_window: tuple[int, int] | None
    pass_lower: bool
    pass_upper: bool
    per_k: list[tuple[int, float]]
    C_report: float | None = None
    tol: float = LOWER_TOL

    @property
    def status(self) -> str:
        if not (self.pass_lower and self.pass_upper):
            return "fail"
        if self.plateau_window is None and self.g_norm > 0:
            return "indeterminate"
        return "pass"

    @property
    def passed(self) -> bool:
        return self.pass_lower and self.pass_upper

    def to_json(self) -> dict:
        return {
            "u": self.u,
            "p": self.p,
            "g_u_norm": self.g_norm,
            "limsup_estimate": self.limsup_estimate,
            "liminf_estimate": self.liminf_estimate,
            "lower_ratio": _f(self.lower_ratio),
            "lower_threshold": LOWER_FACTOR * (1 - self.tol),
            "upper_ratio": _f(self.upper_ratio),
            "C_report": self.C_report,
            "window": list(self.window),
            "plateau_window": list(self.plateau_window) if self.plateau_window else None,
            "per_k": [[k, v] for k, v in self.per_k],
            "pass_lower": self.pass_lower,
            "pass_upper": self.pass_upper,
            "status": self.status,
            "pass": self.passed,
        }


def equivalence_experiment(
    space: MetricMeasureSpace,
    u: np.ndarray,
    p: float,
    k_window: tuple[int, int] | None = None,
    trailing: int = 3,
    *,
    label: str = "u",
    tol: float = LOWER_TOL,
    C_report: float | None = None,
) -> EquivalenceReport:
    """Compare the window limsup of ``|| |T_k u|_p ||_p`` with ``||g_u||_p``.

    ``lower_ratio`` is limsup over ``||g_u||_p`` and must reach ``(1 - tol) / 4``;
    ``upper_ratio`` is the largest value over the whole window divided by
    ``||g_u||_p`` and must be finite (and below ``C_report`` when given).
    """
    if not space.has_edges:
        raise ValueError("the gradient oracle needs a graph")
    u = space.check_function(u)
    g = minimal_upper_gradient_edge(space, u, p)
    ns = norm_star(u, space, p, k_window, trailing)
    top = max(v for _, v in ns.per_k)
    if g.objective == 0:
        lower = upper = 0.0 if top == 0 else float("inf")
        pass_lower = True
    else:
        lower = ns.limsup_estimate / g.objective
        upper = top / g.objective
        pass_lower = lower >= LOWER_FACTOR * (1 - tol)
    pass_upper = math.isfinite(upper) and (C_report is None or upper <= C_report)
    return EquivalenceReport(
        u=label,
        p=p,
        g_norm=g.objective,
        limsup_estimate=ns.limsup_estimate,
        liminf_estimate=ns.liminf_estimate,
        lower_ratio=lower,
        upper_ratio=upper,
        window=ns.window,
        plateau_window=ns.plateau_window,
        pass_lower=pass_lower,
        pass_upper=pass_upper,
        per_k=ns.per_k,
        C_report=C_report,
        tol=tol,
    )


# -- pointwise comparability ---------------------------------------------------------


def interior_mask(space: MetricMeasureSpace, margin: float) -> np.ndarray:
    """Points at distance at least ``margin`` from every point of deficient
    degree (the boundary of a grid); all points when there is none."""
    if not space.has_edges:
        return np.ones(space.n, dtype=bool)
    deg = space.degree
    boundary = np.flatnonzero(deg < deg.max())
    if boundary.size == 0:
        return np.ones(space.n, dtype=bool)
    return space.dist[boundary].min(axis=0) >= margin * (1 - 1e-12)


@dataclass
class RatioStats:
    norm: str
    C_measured: float
    fraction_within: float
    quantiles: dict[str, float]
    counted: int
    vacuous: int
    failures: list[int]
    spikes: list[int]

    def to_json(self) -> dict:
        return {
            "norm": self.norm,
            "C_measured": _f(self.C_measured),
            "fraction_within": self.fraction_within,
            "quantiles": {k: _f(v) for k, v in self.quantiles.items()},
            "counted": self.counted,
            "vacuous": self.vacuous,
            "failures": self.failures,
            "spikes": self.spikes,
        }


def _ratio_stats(name: str, h: np.ndarray, g: np.ndarray, mask: np.ndarray, C: float) -> RatioStats:
    idx = np.flatnonzero(mask)
    hv, gv = h[idx], g[idx]
    vac = (gv == 0) & (hv <= 1e-12)
    keep = ~vac
    idx, hv, gv = idx[keep], hv[keep], gv[keep]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(gv > 0, hv / gv, np.inf)
        dev = np.where(r > 0, np.maximum(r, 1 / r), np.inf)
    fails = idx[gv == 0].tolist()
    if idx.size == 0:
        return RatioStats(name, 1.0, 1.0, {}, 0, int(vac.sum()), [], [])
    C_meas = float(np.quantile(dev, 0.95, method="inverted_cdf"))
    q = {f"q{int(100 * t):02d}": float(np.quantile(r, t, method="inverted_cdf")) for t in (0.05, 0.5, 0.95)}
    order = np.argsort(-dev, kind="stable")
    spikes = idx[order[: min(10, idx.size)]].tolist()
    return RatioStats(name, C_meas, float(np.mean(dev <= C)), q, int(idx.size), int(vac.sum()), fails, spikes)


@dataclass
class PointwiseReport:
    q: float
    p: float
    window: tuple[int, int]
    trailing_ks: list[int]
    C_threshold: float
    l1: RatioStats
    lp: RatioStats
    domination_constant: float
    domination_fraction: float
    domination_violations: list[int]
    domination_empirical: float
    constants: dict

    @property
    def pass_ratio(self) -> bool:
        return self.l1.fraction_within >= 0.95 and not self.l1.failures

    @property
    def pass_domination(self) -> bool:
        return not self.domination_violations

    @property
    def passed(self) -> bool:
        return self.pass_ratio and self.pass_domination

    def to_json(self) -> dict:
        return {
            "q": self.q,
            "p": self.p,
            "window": list(self.window),
            "trailing_ks": self.trailing_ks,
            "C_threshold": self.C_threshold,
            "ratio_l1": self.l1.to_json(),
            "ratio_lp": self.lp.to_json(),
            "domination": {
                "constant": _f(self.domination_constant),
                "fraction": self.domination_fraction,
                "violations": self.domination_violations[:20],
                "empirical_constant": _f(self.domination_empirical),
                **self.constants,
            },
            "pass_ratio": self.pass_ratio,
            "pass_domination": self.pass_domination,
            "pass": self.passed,
        }


def pointwise_experiment(
    space: MetricMeasureSpace,
    u: np.ndarray,
    q: float | None = None,
    p: float = 2.0,
    k_window: tuple[int, int] | None = None,
    trailing: int = 3,
    *,
    lam: float = DEFAULT_LAMBDA,
    C_threshold: float = 10.0,
    interior_margin: float = 3.0,
) -> PointwiseReport:
    """Pointwise comparison of the window limsup of ``|T_k u|`` with ``g_u``.

    The ratio statistic uses ``|T_k u(x)|_1`` (and, for reference,
    ``|T_k u(x)|_p``) at interior points; ``C_measured`` is the 95th
    percentile of ``max(ratio, 1/ratio)``. The domination
    ``|T_k u(x)|_1 <= C (M g_u^q)(x)^(1/q)`` is checked at every point with
    ``C = N * 20 c_PI D * D'^(1/q)``, where ``c_PI`` is the ``q``-Poincare
    estimate on the cover balls, ``D`` the chaining ratio and ``D'`` the
    largest ``mu(B(x, (5 lam + 1) r)) / mu(5 lam B[x])``.
    """
    q = (1 + p) / 2 if q is None else q
    if not 1 <= q < p:
        raise ValueError("need 1 <= q < p")
    u = space.check_function(u)
    gu = minimal_upper_gradient_edge(space, u, p).g_vertex
    lo, hi = _window(space, k_window)
    if trailing > hi - lo + 1:
        raise ValueError("trailing exceeds the window")
    ks = list(range(hi - trailing + 1, hi + 1))
    h1 = np.zeros(space.n)
    hp = np.zeros(space.n)
    Dprime = 1.0
    w = space.weights
    for k in ks:
        cov = get_cover(space, k)
        h1 = np.maximum(h1, tk_pointwise(u, cov, 1))
        hp = np.maximum(hp, tk_pointwise(u, cov, p))
        r = cov.radius
        big = (space.dist <= (5 * lam + 1) * r * (1 + BALL_RTOL)) @ w
        small = ((space.dist[cov.centers] <= 5 * lam * r * (1 + BALL_RTOL)) @ w)[cov.cell_of]
        Dprime = max(Dprime, float((big / small).max()))
    interior = interior_mask(space, interior_margin * 2.0**-ks[0])
    l1 = _ratio_stats("l1", h1, gu, interior, C_threshold)
    lp = _ratio_stats(f"l{p:g}", hp, gu, interior, C_threshold)

    c_PI = poincare_sweep(space, u, gu, q, lam, "cover", k_window=(ks[0], ks[-1])).c_PI_estimate
    D = chaining_ratio(space, ks)
    N = max(get_cover(space, k).N_k for k in ks)
    C_dom = N * 20.0 * c_PI * D * Dprime ** (1.0 / q) if c_PI > 0 else 0.0
    Mq = maximal_function(space, gu**q, ladder="exact") ** (1.0 / q)
    bound = _safe_mul(C_dom, Mq)
    bad = h1 > bound * (1 + EXACT_TOL) + 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        emp = np.where(Mq > 0, h1 / Mq, np.where(h1 > 0, np.inf, 0.0))
    return PointwiseReport(
        q=q,
        p=p,
        window=(lo, hi),
        trailing_ks=ks,
        C_threshold=C_threshold,
        l1=l1,
        lp=lp,
        domination_constant=C_dom,
        domination_fraction=float(np.mean(~bad)),
        domination_violations=np.flatnonzero(bad).tolist(),
        domination_empirical=float(emp.max()),
        constants={"c_PI_q": _f(c_PI), "chaining_ratio": D, "maximal_ratio": Dprime, "N": N, "lambda": lam},
    )


# -- uniform convexity ------------------------------------------------------------------


def lp_modulus(p: float, eps: float) -> float:
    """Modulus of convexity of ``L^p``.

    ``p >= 2``: ``1 - (1 - (eps/2)^p)^(1/p)``. ``1 < p < 2``: the root of
    ``(1 - d + eps/2)^p + |1 - d - eps/2|^p = 2`` (Hanner). ``p = 1``: 0.
    """
    if eps <= 0:
        return 0.0
    eps = min(eps, 2.0)
    if p == 1:
        return 0.0
    if p >= 2:
        return 1.0 - (1.0 - (eps / 2) ** p) ** (1.0 / p)
    f = lambda d: (1 - d + eps / 2) ** p + abs(1 - d - eps / 2) ** p - 2
    if f(0.0) <= 0:
        return 0.0
    return brentq(f, 0.0, 1.0, xtol=1e-15)


@dataclass
class ConvexityReport:
    p: float
    k: int
    epsilon_grid: list[float]
    delta_analytic: list[float]
    max_midpoint: list[float]
    pairs_per_eps: list[int]
    counterexamples: list[dict]
    sample_count: int
    disjoint_pair: dict | None
    slack: float

    @property
    def passed(self) -> bool:
        if self.p > 1:
            return not self.counterexamples
        # p = 1 passes when the failure of uniform convexity is exhibited
        return self.disjoint_pair is not None and self.disjoint_pair["midpoint"] >= 1 - 1e-12

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "k": self.k,
            "sample_count": self.sample_count,
            "epsilon_grid": self.epsilon_grid,
            "delta_observed": [1 - m if m > -np.inf else None for m in self.max_midpoint],
            "delta_analytic": self.delta_analytic,
            "max_midpoint": [m if m > -np.inf else None for m in self.max_midpoint],
            "pairs_per_eps": self.pairs_per_eps,
            "counterexamples": self.counterexamples[:20],
            "counterexample_count": len(self.counterexamples),
            "disjoint_pair": self.disjoint_pair,
            "slack": self.slack,
            "pass": self.passed,
        }


def _image_support(cover, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    comps = ball_components(cover, u)
    live = cover.cell_masses > 0
    return np.abs(u) > 0, (np.abs(comps) > 0) & live[:, None]


def disjoint_pair(space: MetricMeasureSpace, cover, p: float) -> dict | None:
    """Two unit point masses whose images under ``u -> (u, T_k u)`` have
    disjoint supports, so ``Phi`` is additive on them at ``p = 1``."""
    a = 0
    order = np.argsort(-space.dist[a], kind="stable")
    ea = np.zeros(space.n)
    ea[a] = 1
    sa = _image_support(cover, ea)
    for b in order.tolist():
        if b == a:
            continue
        eb = np.zeros(space.n)
        eb[b] = 1
        sb = _image_support(cover, eb)
        if not (sa[0] & sb[0]).any() and not (sa[1] & sb[1]).any():
            u = ea / product_norm(ea, cover, p)
            v = eb / product_norm(eb, cover, p)
            return {
                "points": [int(a), int(b)],
                "distance": float(space.dist[a, b]),
                "phi_u": product_norm(u, cover, p),
                "phi_v": product_norm(v, cover, p),
                "phi_diff": product_norm(u - v, cover, p),
                "midpoint": product_norm(u + v, cover, p) / 2,
            }
    return None


def _sample_pairs(rng: np.random.Generator, n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Three pair families: independent, small perturbations and
    ``(a + b, a - b)`` splits."""
    kinds = np.arange(m) % 3
    U = rng.standard_normal((n, m))
    V = rng.standard_normal((n, m))
    t = 10.0 ** rng.uniform(-3, 0.5, size=m)
    pert = kinds == 1
    V[:, pert] = U[:, pert] + t[pert] * V[:, pert]
    split = kinds == 2
    A, B = U[:, split].copy(), V[:, split] * rng.uniform(0.05, 1.5, size=split.sum())
    U[:, split], V[:, split] = A + B, A - B
    # sparse supports stress the disjoint-support regime
    sparse_cols = rng.random(m) < 0.2
    mask = rng.random((n, m)) < 0.1
    U[:, sparse_cols] *= mask[:, sparse_cols]
    V[:, sparse_cols] *= (~mask)[:, sparse_cols]
    return U, V


def convexity_probe(
    space: MetricMeasureSpace,
    p: float,
    k_fixed: int,
    sample_count: int = 10_000,
    epsilon_grid: Sequence[float] = (0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 1.9),
    seed: int = 0,
    *,
    slack: float = EXACT_TOL,
    chunk: int = 2000,
) -> ConvexityReport:
    """Sample pairs in the unit ball of the fixed-generation product norm
    ``Phi`` and compare ``Phi(u + v) / 2`` with ``1 - delta_p(eps)``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    cover = get_cover(space, k_fixed)
    rng = np.random.default_rng(seed)
    eps = [float(e) for e in epsilon_grid]
    deltas = [lp_modulus(p, e) for e in eps]
    best = [-np.inf] * len(eps)
    counts = [0] * len(eps)
    counter: list[dict] = []
    done = 0
    while done < sample_count:
        m = min(chunk, sample_count - done)
        U, V = _sample_pairs(rng, space.n, m)
        nu = product_norm(U, cover, p)
        nv = product_norm(V, cover, p)
        ok = (nu > 0) & (nv > 0)
        U, V, nu, nv = U[:, ok], V[:, ok], nu[ok], nv[ok]
        # radii in (0.5, 1]; most pairs sit on the sphere
        su = np.where(rng.random(nu.size) < 0.7, 1.0, rng.uniform(0.5, 1.0, nu.size))
        sv = np.where(rng.random(nv.size) < 0.7, 1.0, rng.uniform(0.5, 1.0, nv.size))
        U, V = U * (su / nu), V * (sv / nv)
        diff = product_norm(U - V, cover, p)
        mid = product_norm(U + V, cover, p) / 2
        for i, (e, d) in enumerate(zip(eps, deltas)):
            sel = diff > e
            counts[i] += int(sel.sum())
            if sel.any():
                best[i] = max(best[i], float(mid[sel].max()))
                bad = np.flatnonzero(sel & (mid > 1 - d + slack))
                for j in bad[:5].tolist():
                    counter.append({"eps": e, "diff": float(diff[j]), "midpoint": float(mid[j]), "bound": 1 - d, "sample": done + j})
        done += m
    return ConvexityReport(
        p=p,
        k=k_fixed,
        epsilon_grid=eps,
        delta_analytic=deltas,
        max_midpoint=best,
        pairs_per_eps=counts,
        counterexamples=counter,
        sample_count=sample_count,
        disjoint_pair=disjoint_pair(space, cover, p),
        slack=slack,
    )


# -- cover sensitivity ---------------------------------------------------------------------


@dataclass
class CrossCoverReport:
    p: float
    starts: list[int]
    limsups: list[float]
    xi_observed: float
    spread: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.spread <= self.xi_observed - 1 + self.tol

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "starts": self.starts,
            "limsup_estimates": self.limsups,
            "xi_observed": _f(self.xi_observed),
            "relative_spread": self.spread,
            "tol": self.tol,
            "pass": self.passed,
        }


def cross_cover_experiment(
    space: MetricMeasureSpace,
    u: np.ndarray,
    p: float,
    k_window: tuple[int, int] | None = None,
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    trailing: int = 3,
    tol: float = 0.05,
) -> CrossCoverReport:
    """Recompute the window limsup with the farthest-point traversal
    started at a seeded random point; the spread should stay within the
    observed limsup/liminf ratio."""
    if len(seeds) < 2:
        raise ValueError("need at least two seeds")
    u = space.check_function(u)
    starts = [int(np.random.default_rng(s).integers(space.n)) for s in seeds]
    if space.n == 1:
        return CrossCoverReport(p, starts, [0.0] * len(starts), 1.0, 0.0, tol)
    lo, hi = _window(space, k_window)
    trailing = min(trailing, hi - lo + 1)
    reps = [norm_star(u, space, p, (lo, hi), trailing, start=s) for s in starts]
    vals = [r.limsup_estimate for r in reps]
    top = max(vals)
    spread = 0.0 if top == 0 else (top - min(vals)) / top
    xi = max(r.xi_observed for r in reps)
    return CrossCoverReport(p, starts, vals, xi, spread, tol)


# -- discrete curve estimate -----------------------------------------------------------------


@dataclass
class AlmostUGReport:
    trials: int
    violations: int
    min_slack: float
    uncertified: int
    skipped: int
    per_space: dict[str, dict]
    witnesses: list[dict]

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "violations": self.violations,
            "min_slack": self.min_slack,
            "uncertified": self.uncertified,
            "skipped": self.skipped,
            "per_space": self.per_space,
            "witnesses": self.witnesses[:20],
            "factor": 4.0,
            "tol": EXACT_TOL,
            "pass": self.passed,
        }


def default_spaces() -> list[MetricMeasureSpace]:
    return [
        generate_space("grid1d", n=256),
        generate_space("grid2d", nx=32, ny=32),
        generate_space("circle", n=256),
    ]


def _random_function(space: MetricMeasureSpace, rng: np.random.Generator, kind: int) -> np.ndarray:
    if kind == 0:
        return rng.standard_normal(space.n)
    if kind == 1:
        return np.cumsum(rng.standard_normal(space.n))
    c = space.coords if space.coords is not None else np.arange(space.n)[:, None] / space.n
    a = rng.standard_normal(c.shape[1])
    return np.sin(3 * c @ a + rng.uniform(0, 2 * np.pi))


def _random_admissible_curve(space: MetricMeasureSpace, rng: np.random.Generator, r: float, monotone: bool):
    """Walk towards a random target at distance at least ``r``; geodesic
    when ``monotone``, otherwise with random detours."""
    for _ in range(50):
        s = int(rng.integers(space.n))
        far = np.flatnonzero(space.dist[s] >= r)
        if far.size == 0:
            continue
        t = int(far[rng.integers(far.size)])
        bias = 1.0 if monotone else float(rng.uniform(0.6, 0.9))
        c = random_walk_curve(space, rng, 20 * space.n, start=s, monotone_target=t, bias=bias)
        if space.dist[c.endpoints] >= r:
            return c
    return None


def almostug_experiment(
    spaces: Sequence[MetricMeasureSpace] | None = None,
    trials: int = 10_000,
    seed: int = 0,
    p_values: Sequence[float] = (1.0, 1.5, 2.0, 3.0),
    curves_per_setup: int = 10,
) -> AlmostUGReport:
    """Randomised check of ``|S_k u(x) - S_k u(y)| <= 4 int |T_k u|_p ds``.

    A trial is one ``(u, curve, k)`` triple; curves are monotone geodesic
    walks or free random walks with endpoints at least ``2^-k`` apart, and
    ``p`` cycles through ``p_values``.
    """
    spaces = default_spaces() if spaces is None else list(spaces)
    rng = np.random.default_rng(seed)
    done = viol = unc = skipped = 0
    min_slack = float("inf")
    per: dict[str, dict] = {}
    wit: list[dict] = []
    setup = 0
    while done < trials:
        space = spaces[setup % len(spaces)]
        lo, hi = admissible_window(space)
        k = int(rng.integers(lo, hi + 1))
        cov = get_cover(space, k)
        u = _random_function(space, rng, setup % 3)
        p = float(p_values[setup % len(p_values)])
        curves = []
        for j in range(min(curves_per_setup, trials - done)):
            c = _random_admissible_curve(space, rng, cov.radius, monotone=bool(j % 2))
            if c is not None:
                curves.append(c)
        setup += 1
        if not curves:
            continue
        rep = check_S_k_inequality(u, cov, p, CurveFamily(tuple(curves)))
        n = int(rep.slacks.size)
        done += n
        skipped += rep.skipped
        bad = rep.violations
        viol += len(bad)
        unc += int((~rep.certified).sum())
        min_slack = min(min_slack, rep.min_slack)
        st = per.setdefault(space.name, {"trials": 0, "violations": 0, "min_slack": float("inf")})
        st["trials"] += n
        st["violations"] += len(bad)
        st["min_slack"] = min(st["min_slack"], rep.min_slack)
        for b in bad:
            wit.append({"space": space.name, "k": k, "p": p, "curve": list(curves[b].vertices), "slack": float(rep.slacks[b])})
    return AlmostUGReport(done, viol, min_slack, unc, skipped, per, wit)
