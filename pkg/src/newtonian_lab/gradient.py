"""Ball-average operator ``S_k``, discrete gradient ``T_k`` and the norm
built from them.

At generation ``k`` every point ``x`` sees its cell ball ``B[x]`` and the
padded neighbour list ``B[x, 1..N]``. ``T_k u(x)`` is the vector of scaled
differences ``2^k (u_{B[x]} - u_{B[x, j]})``; padded slots repeat ``B[x]``
and so contribute zeros.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._parallel import parallel_map
from .covering import BallCover, clip_window, get_cover
from .space import MetricMeasureSpace

PLATEAU_TOL = 0.20


def ball_averages(cover: BallCover, u: np.ndarray) -> np.ndarray:
    """``u_{B_i}`` for every ball; ``u`` may be ``(n,)`` or ``(n, m)``."""
    w = cover.space.weights
    u = np.asarray(u, dtype=float)
    mw = cover.membership * w
    if u.ndim == 1:
        return (mw @ u) / cover.masses
    return (mw @ u) / cover.masses[:, None]


def S_k(u: np.ndarray, cover: BallCover) -> np.ndarray:
    """``S_k u(x) = u_{B[x]}``."""
    u = cover.space.check_function(u)
    return ball_averages(cover, u)[cover.cell_of]


def ball_components(cover: BallCover, u: np.ndarray, arity: int | None = None) -> np.ndarray:
    """Per-ball gradient components, shape ``(M, arity)`` (plus trailing
    batch axis when ``u`` is 2-d)."""
    avg = ball_averages(cover, u)
    table = cover.padded(arity)
    scale = 2.0**cover.k
    if avg.ndim == 1:
        return scale * (avg[:, None] - avg[table])
    return scale * (avg[:, None, :] - avg[table])


@dataclass(frozen=True, eq=False)
class TkField:
    k: int
    p: float
    vectors: np.ndarray  # (n, N_k)
    pointwise_norm: np.ndarray  # (n,)
    cover: BallCover = field(repr=False)

    def lp_norm(self) -> float:
        """``|| |T_k u|_p ||_{L^p}``."""
        return self.cover.space.lp_norm(self.pointwise_norm, self.p)

    def component_norm(self, q: float) -> np.ndarray:
        """``|T_k u(x)|_q`` for another exponent, e.g. ``q = 1``."""
        return _lq(self.vectors, q)


def _lq(vectors: np.ndarray, q: float) -> np.ndarray:
    if vectors.shape[-1] == 0:
        return np.zeros(vectors.shape[:-1])
    a = np.abs(vectors)
    if q == 1:
        return a.sum(axis=-1)
    if np.isinf(q):
        return a.max(axis=-1)
    return (a**q).sum(axis=-1) ** (1.0 / q)


def T_k(u: np.ndarray, cover: BallCover, p: float, arity: int | None = None) -> TkField:
    """Discrete gradient field at generation ``cover.k``.

    ``arity`` pads the neighbour lists to a longer common length; the
    pointwise norm does not depend on it.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    u = cover.space.check_function(u)
    comps = ball_components(cover, u, arity)
    vectors = comps[cover.cell_of]
    vectors.setflags(write=False)
    norms = _lq(comps, p)[cover.cell_of]
    norms.setflags(write=False)
    return TkField(k=cover.k, p=p, vectors=vectors, pointwise_norm=norms, cover=cover)


def tk_pointwise(u: np.ndarray, cover: BallCover, q: float) -> np.ndarray:
    """``|T_k u(x)|_q`` directly from the ball components."""
    comps = ball_components(cover, cover.space.check_function(u))
    return _lq(comps, q)[cover.cell_of]


def tk_lp_norm(u: np.ndarray, cover: BallCover, p: float) -> float:
    """``|| |T_k u|_p ||_{L^p}`` computed cellwise: the cell masses weight
    the per-ball component norms."""
    comps = ball_components(cover, cover.space.check_function(u))
    per_ball = _lq(comps, p)
    return float(np.sum(per_ball**p * cover.cell_masses) ** (1.0 / p))


@dataclass
class NormStarReport:
    p: float
    per_k: list[tuple[int, float]]
    limsup_estimate: float
    liminf_estimate: float
    xi_observed: float
    norm_star: float
    lp_norm_u: float
    plateau_window: tuple[int, int] | None
    window: tuple[int, int]
    trailing: int
    plateau_tol: float = PLATEAU_TOL
    surrogate: str = "limsup/liminf = max/min over the trailing sub-window"

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "per_k": [[k, v] for k, v in self.per_k],
            "limsup_estimate": self.limsup_estimate,
            "liminf_estimate": self.liminf_estimate,
            "xi_observed": self.xi_observed,
            "norm_star": self.norm_star,
            "lp_norm_u": self.lp_norm_u,
            "plateau_window": list(self.plateau_window) if self.plateau_window else None,
            "window": list(self.window),
            "trailing": self.trailing,
            "plateau_tol": self.plateau_tol,
            "surrogate": self.surrogate,
        }


def find_plateau(values: list[tuple[int, float]], tol: float = PLATEAU_TOL) -> tuple[int, int] | None:
    """Longest run of generations whose successive values differ by at most
    ``tol`` relative to the larger one; latest run wins ties. ``None`` when
    no two successive values qualify."""
    best: tuple[int, int] | None = None
    run_start = 0
    for i in range(1, len(values) + 1):
        ok = False
        if i < len(values):
            a, b = values[i - 1][1], values[i][1]
            hi = max(abs(a), abs(b))
            ok = hi == 0 or abs(a - b) <= tol * hi
        if not ok:
            if i - 1 > run_start:
                cand = (values[run_start][0], values[i - 1][0])
                if best is None or cand[1] - cand[0] >= best[1] - best[0]:
                    best = cand
            run_start = i
    return best


def xi_ratio(hi: float, lo: float) -> float:
    if hi == 0:
        return 1.0
    if lo == 0:
        return float("inf")
    return hi / lo


def norm_star(
    u: np.ndarray,
    space: MetricMeasureSpace,
    p: float,
    k_window: tuple[int, int] | None = None,
    trailing: int = 3,
    *,
    plateau_tol: float = PLATEAU_TOL,
    start: int = 0,
) -> NormStarReport:
    """Equivalent Sobolev norm over a finite window of generations.

    The window is clipped to the admissible generations of ``space``. The
    limsup over ``k`` is realised as the maximum over the last ``trailing``
    generations and the liminf as their minimum.
    """
    u = space.check_function(u)
    if k_window is None:
        from .covering import admissible_window

        k_window = admissible_window(space)
    lo, hi = clip_window(space, k_window)
    ks = list(range(lo, hi + 1))
    if not 1 <= trailing:
        raise ValueError("trailing must be >= 1")
    if trailing > len(ks):
        raise ValueError(f"trailing={trailing} exceeds the clipped window length {len(ks)}")
    values = parallel_map(lambda k: tk_lp_norm(u, get_cover(space, k, start), p), ks)
    per_k = list(zip(ks, values))
    tail = values[-trailing:]
    sup, inf = max(tail), min(tail)
    nu = space.lp_norm(u, p)
    return NormStarReport(
        p=p,
        per_k=per_k,
        limsup_estimate=sup,
        liminf_estimate=inf,
        xi_observed=xi_ratio(sup, inf),
        norm_star=float((nu**p + sup**p) ** (1.0 / p)),
        lp_norm_u=nu,
        plateau_window=find_plateau(per_k, plateau_tol),
        window=(lo, hi),
        trailing=trailing,
        plateau_tol=plateau_tol,
    )


def product_norm(u: np.ndarray, cover: BallCover, p: float) -> np.ndarray | float:
    """Fixed-generation norm ``(||u||_p^p + || |T_k u|_p ||_p^p)^(1/p)``.

    This is the norm of ``(u, T_k^1 u, ..., T_k^N u)`` in ``L^p(X, l^p_{N+1})``.
    ``u`` may be a batch ``(n, m)``; one norm per column is returned.
    """
    w = cover.space.weights
    u = np.asarray(u, dtype=float)
    comps = ball_components(cover, u)
    if u.ndim == 1:
        tk = (np.abs(comps) ** p).sum(axis=1) @ cover.cell_masses
        return float((np.abs(u) ** p @ w + tk) ** (1.0 / p))
    tk = np.einsum("i,ijm->m", cover.cell_masses, np.abs(comps) ** p)
    return ((np.abs(u) ** p).T @ w + tk) ** (1.0 / p)
