"""Ball queries and measure-theoretic statistics on finite spaces."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .space import MetricMeasureSpace, dyadic_ladder

# closed-ball membership slack, relative to the radius
BALL_RTOL = 1e-12


def ball_mask(space: MetricMeasureSpace, center: int, radius: float, closed: bool = True) -> np.ndarray:
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    d = space.dist[center]
    if closed:
        return d <= radius * (1 + BALL_RTOL)
    return d < radius


def ball(space: MetricMeasureSpace, center: int, radius: float, closed: bool = True) -> np.ndarray:
    """Indices of ``B(center, radius)``, sorted. Balls are closed by default."""
    return np.flatnonzero(ball_mask(space, center, radius, closed))


def balls_mask(space: MetricMeasureSpace, centers: Sequence[int], radius: float) -> np.ndarray:
    """Boolean membership matrix, one row per closed ball."""
    return space.dist[np.asarray(centers, dtype=np.int64)] <= radius * (1 + BALL_RTOL)


def ball_mass(space: MetricMeasureSpace, members: np.ndarray) -> float:
    return float(space.weights[members].sum())


def ball_average(space: MetricMeasureSpace, u: np.ndarray, members: np.ndarray) -> float:
    """Weighted mean of ``u`` over a nonempty point set."""
    members = np.asarray(members)
    if members.dtype == bool:
        members = np.flatnonzero(members)
    if members.size == 0:
        raise ValueError("average over an empty ball")
    u = np.asarray(u, dtype=float)
    w = space.weights[members]
    return float(np.dot(u[members], w) / w.sum())


def set_diameter(space: MetricMeasureSpace, members: np.ndarray) -> float:
    members = np.asarray(members)
    if members.size <= 1:
        return 0.0
    return float(space.dist[np.ix_(members, members)].max())


# -- doubling ---------------------------------------------------------------


@dataclass
class DoublingStats:
    C_d_estimate: float
    C_0_estimate: dict[float, int] = field(default_factory=dict)
    N_max: int = 1
    sample_log: list[tuple[int, float, float]] = field(default_factory=list)
    N_per_k: dict[int, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "C_d_estimate": self.C_d_estimate,
            "C_0_estimate": {str(k): v for k, v in self.C_0_estimate.items()},
            "N_max": self.N_max,
            "N_per_k": {str(k): v for k, v in self.N_per_k.items()},
            "samples": len(self.sample_log),
        }


def doubling_ratio(space: MetricMeasureSpace, x: int, r: float) -> float:
    """``mu(B(x, 2r)) / mu(B(x, r))``."""
    d = space.dist[x]
    w = space.weights
    big = w[d <= 2 * r * (1 + BALL_RTOL)].sum()
    small = w[d <= r * (1 + BALL_RTOL)].sum()
    return float(big / small)


def estimate_doubling(
    space: MetricMeasureSpace,
    sample_count: int | None = None,
    seed: int = 0,
    ladder: Sequence[float] | None = None,
    *,
    with_covers: bool = True,
    thetas: Sequence[float] = (1.0, 5.0),
) -> DoublingStats:
    """Doubling statistics of ``space``.

    Ratios are computed exactly on ``(x, r)`` pairs with ``r`` drawn from the
    dyadic radius ladder. When ``sample_count`` covers every pair, or is
    ``None``, the scan is exhaustive; otherwise pairs are drawn with ``seed``.
    With ``with_covers`` the overlap constants ``C_0(theta)`` and the maximal
    neighbour count are measured on the covers of the admissible window.
    """
    if sample_count is not None and sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    radii = np.asarray(dyadic_ladder(space) if ladder is None else ladder, dtype=float)
    if space.n == 1 or radii.size == 0:
        stats = DoublingStats(C_d_estimate=1.0)
    else:
        pairs = [(x, r) for r in radii for x in range(space.n)]
        if sample_count is not None and sample_count < len(pairs):
            rng = np.random.default_rng(seed)
            pick = np.sort(rng.choice(len(pairs), size=sample_count, replace=False))
            pairs = [pairs[i] for i in pick]
        log = []
        w = space.weights
        for r in sorted({r for _, r in pairs}, reverse=True):
            xs = np.array([x for x, rr in pairs if rr == r])
            d = space.dist[xs]
            big = (d <= 2 * r * (1 + BALL_RTOL)) @ w
            small = (d <= r * (1 + BALL_RTOL)) @ w
            log.extend(zip(xs.tolist(), [float(r)] * xs.size, (big / small).tolist()))
        stats = DoublingStats(C_d_estimate=max(1.0, max(t[2] for t in log)), sample_log=log)
    if with_covers:
        from .covering import admissible_window, get_cover, overlap_counts

        try:
            kmin, kmax = admissible_window(space)
        except ValueError:
            kmin, kmax = 0, 0
        c0 = {float(t): 1 for t in thetas}
        for k in range(kmin, kmax + 1):
            cover = get_cover(space, k)
            stats.N_per_k[k] = cover.N_k
            for t in thetas:
                c0[float(t)] = max(c0[float(t)], int(overlap_counts(cover, t).max()))
        stats.C_0_estimate = c0
        stats.N_max = max(1, max(stats.N_per_k.values(), default=1))
    return stats


# -- maximal function and lip -----------------------------------------------


def maximal_ladder(space: MetricMeasureSpace) -> np.ndarray:
    """Default radius ladder of the maximal operator: the singleton radius 0,
    the dyadic radii, and the diameter (the whole space)."""
    return np.unique(np.concatenate([[0.0], dyadic_ladder(space), [space.diameter]]))


def maximal_function(
    space: MetricMeasureSpace,
    g: np.ndarray,
    ladder: Sequence[float] | str | None = None,
) -> np.ndarray:
    """Discrete Hardy-Littlewood maximal function of ``g``.

    ``(Mg)(x) = max_r avg_{B(x, r)} |g|`` over a radius ladder that contains
    the singleton ball, so ``Mg >= |g|`` pointwise. ``ladder="exact"`` takes
    every distinct distance from ``x``, which realises the supremum over all
    radii on a finite space.
    """
    g = np.abs(space.check_function(g))
    w = space.weights
    if isinstance(ladder, str):
        if ladder != "exact":
            raise ValueError(f"unknown ladder {ladder!r}")
        return _maximal_exact(space, g)
    radii = maximal_ladder(space) if ladder is None else np.asarray(ladder, dtype=float)
    out = g.copy()
    gw = g * w
    for r in radii:
        m = space.dist <= r * (1 + BALL_RTOL)
        out = np.maximum(out, (m @ gw) / (m @ w))
    return out


def _maximal_exact(space: MetricMeasureSpace, g: np.ndarray) -> np.ndarray:
    order = np.argsort(space.dist, axis=1, kind="stable")
    d = np.take_along_axis(space.dist, order, axis=1)
    w = space.weights[order]
    cw = np.cumsum(w, axis=1)
    cg = np.cumsum(w * g[order], axis=1)
    # only positions closing a tie group correspond to actual balls
    closes = np.ones_like(d, dtype=bool)
    closes[:, :-1] = d[:, 1:] > d[:, :-1]
    avg = np.where(closes, cg / cw, -np.inf)
    return np.maximum(avg.max(axis=1), g)


def maximal_operator_ratio(space: MetricMeasureSpace, g: np.ndarray, p: float) -> float:
    """``||Mg||_p / ||g||_p`` (the recorded boundedness constant)."""
    ng = space.lp_norm(g, p)
    if ng == 0:
        return 0.0
    return space.lp_norm(maximal_function(space, g), p) / ng


class LipEstimate(NamedTuple):
    values: np.ndarray
    degenerate: np.ndarray  # points where some ladder ball was a singleton


def lip_estimate(space: MetricMeasureSpace, u: np.ndarray, radius_ladder: Sequence[float]) -> LipEstimate:
    """Finite-ladder surrogate of the pointwise lower Lipschitz constant.

    For each ladder radius ``r`` the ratio is
    ``sup_{y in B(x, r)} |u(x) - u(y)| / r_eff`` where ``r_eff`` is the
    largest distance from ``x`` attained inside ``B(x, r)``: on a finite
    space the closed ball of radius ``r`` equals the ball of radius
    ``r_eff``. The estimate is the minimum over the ladder. Singleton balls
    give ratio 0 and are flagged in ``degenerate``.
    """
    u = space.check_function(u)
    radii = np.asarray(radius_ladder, dtype=float)
    if radii.size == 0:
        raise ValueError("empty radius ladder")
    if np.any(np.diff(radii) >= 0):
        raise ValueError("radius ladder must be strictly decreasing")
    diff = np.abs(u[:, None] - u[None, :])
    best = np.full(space.n, np.inf)
    degenerate = np.zeros(space.n, dtype=bool)
    for r in radii:
        m = space.dist <= r * (1 + BALL_RTOL)
        sup = np.where(m, diff, 0.0).max(axis=1)
        reff = np.where(m, space.dist, 0.0).max(axis=1)
        single = reff == 0
        ratio = np.where(single, 0.0, sup / np.where(single, 1.0, reff))
        degenerate |= single
        best = np.minimum(best, ratio)
    return LipEstimate(best, degenerate)
