"""p-modulus of curve families and minimal upper gradients.

Both problems are instances of the covering program

    minimise  sum_v w_v x_v^p   subject to  A x >= b,  x >= 0,

where row ``i`` of ``A`` holds the trapezoid weights of curve ``i``. For
``p > 1`` the Lagrange dual is smooth and concave:

    D(lam) = b . lam - (p - 1) sum_v w_v x_v(lam)^p,
    x_v(lam) = ((A^T lam)_v / (p w_v))^(1 / (p - 1)),

so a bound-constrained quasi-Newton run on the dual finds the active set and
a Newton solve of ``A_S x(lam_S) = b_S`` on it polishes the answer; projected
ascent with Polyak steps takes over when the polish stalls. Every solution
carries the gap between a feasible primal value and a dual value. ``p = 1``
is a linear program.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy import sparse
from scipy.optimize import linprog, minimize

from .curves import (
    Curve,
    CurveError,
    CurveFamily,
    check_upper_gradient,
    enumerate_family,
    family_matrix,
    make_curve,
    to_networkx,
)
from .space import MetricMeasureSpace

FEAS_TOL = 1e-8
GAP_TOL = 1e-6
MAX_ITER = 100_000


class DisconnectedTerminals(ValueError):
    """No curve joins the terminal sets; the connecting family has modulus 0."""

    modulus = 0.0


@dataclass
class ProgramResult:
    x: np.ndarray
    value: float
    dual_value: float
    lam: np.ndarray
    iterations: int
    converged: bool
    method: str

    @property
    def gap(self) -> float:
        return max(0.0, self.value - self.dual_value)


@dataclass
class ModulusSolution:
    p: float
    value: float
    density: np.ndarray
    min_curve_integral: float
    iterations: int
    dual_gap: float
    converged: bool
    active: list[int]
    method: str
    certificate: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "value": self.value,
            "density": self.density.tolist(),
            "min_curve_integral": self.min_curve_integral,
            "iterations": self.iterations,
            "dual_gap": self.dual_gap,
            "converged": self.converged,
            "active": self.active,
            "method": self.method,
            "certificate": self.certificate,
        }


@dataclass
class GradientSolution:
    mode: str
    g: np.ndarray
    objective: float
    binding_constraints: list[int]
    p: float
    g_vertex: np.ndarray | None = None
    dual_gap: float = 0.0
    converged: bool = True

    def to_json(self) -> dict:
        out = {
            "mode": self.mode,
            "p": self.p,
            "g": self.g.tolist(),
            "objective": self.objective,
            "binding_constraints": self.binding_constraints,
            "dual_gap": self.dual_gap,
            "converged": self.converged,
        }
        if self.g_vertex is not None and self.mode == "edge-oracle":
            out["g_vertex"] = self.g_vertex.tolist()
        return out


# -- the covering program -----------------------------------------------------


class _Dual:
    def __init__(self, A: sparse.csr_matrix, b: np.ndarray, w: np.ndarray, p: float):
        self.A, self.AT, self.b, self.w, self.p = A, A.T.tocsr(), b, w, p
        self.e = 1.0 / (p - 1.0)

    def x_of(self, lam: np.ndarray) -> np.ndarray:
        z = np.maximum(self.AT @ lam, 0.0)
        return (z / (self.p * self.w)) ** self.e

    def value(self, lam: np.ndarray, x: np.ndarray | None = None) -> float:
        x = self.x_of(lam) if x is None else x
        return float(self.b @ lam - (self.p - 1.0) * np.dot(self.w, x**self.p))

    def primal(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        """Objective of ``x`` scaled up to feasibility."""
        Ax = self.A @ x
        with np.errstate(divide="ignore", invalid="ignore"):
            need = np.where(self.b > 0, self.b / Ax, 0.0)
        s = float(np.max(need, initial=0.0))
        if not np.isfinite(s):
            return float("inf"), x
        xs = x * max(s, 0.0)
        return float(np.dot(self.w, xs**self.p)), xs


def _initial_lambda(dual: _Dual) -> np.ndarray:
    # best multiple of the all-ones vector, in closed form
    m = dual.b.size
    one = np.ones(m)
    x1 = dual.x_of(one)
    q = dual.p / (dual.p - 1.0)
    K = (dual.p - 1.0) * np.dot(dual.w, x1**dual.p)
    B = dual.b.sum()
    if K <= 0:
        return one
    t = (B / (q * K)) ** (1.0 / (q - 1.0))
    return t * one


def _newton_polish(dual: _Dual, lam: np.ndarray, max_outer: int = 60, max_inner: int = 60) -> np.ndarray:
    """Active-set Newton on ``A_S x(lam_S) = b_S``; drops negative
    multipliers and adds violated rows until the KKT system holds."""
    A, b, p = dual.A, dual.b, dual.p
    m = b.size
    scale = max(lam.max(initial=0.0), 1e-300)
    active = set(np.flatnonzero(lam > 1e-9 * scale).tolist())
    if not active:
        active = {int(np.argmax(b - A @ dual.x_of(lam)))}
    lam = lam.copy()
    for _ in range(max_outer):
        S = np.array(sorted(active))
        lam_S = lam[S].copy()
        AS = A[S]
        for _ in range(max_inner):
            full = np.zeros(m)
            full[S] = lam_S
            x = dual.x_of(full)
            res = AS @ x - b[S]
            nres = np.linalg.norm(res)
            if nres <= 1e-14 * max(1.0, np.linalg.norm(b[S])):
                break
            z = np.maximum(dual.AT @ full, 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                dxdz = np.where(z > 0, x / ((p - 1.0) * z), 0.0)
            J = (AS.multiply(dxdz[None, :]) @ AS.T).toarray()
            step = np.linalg.lstsq(J, -res, rcond=None)[0]
            t = 1.0
            while t > 1e-12:
                trial = np.zeros(m)
                trial[S] = lam_S + t * step
                r2 = np.linalg.norm(AS @ dual.x_of(trial) - b[S])
                if r2 < nres:
                    break
                t *= 0.5
            if t <= 1e-12:
                break
            lam_S = lam_S + t * step
        neg = lam_S < 0
        lam = np.zeros(m)
        lam[S] = np.maximum(lam_S, 0.0)
        if neg.any():
            active.discard(int(S[np.argmin(lam_S)]))
            if not active:
                active = {int(S[np.argmax(lam_S)])}
            continue
        x = dual.x_of(lam)
        viol = b - A @ x
        viol[list(active)] = -np.inf
        worst = int(np.argmax(viol))
        if viol[worst] > FEAS_TOL * max(1.0, b[worst]):
            active.add(worst)
            continue
        break
    return lam


def solve_covering_program(
    A: sparse.spmatrix,
    b: np.ndarray,
    w: np.ndarray,
    p: float,
    *,
    max_iter: int = MAX_ITER,
    gap_tol: float = GAP_TOL,
    polish_every: int = 200,
) -> ProgramResult:
    """Minimise ``sum w x^p`` over ``A x >= b, x >= 0`` (``A >= 0``)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    A = sparse.csr_matrix(A, dtype=float)
    b = np.asarray(b, dtype=float)
    w = np.asarray(w, dtype=float)
    n = A.shape[1]
    keep = b > 0
    if not keep.all():
        A, b_kept = A[keep], b[keep]
    else:
        b_kept = b
    m = b_kept.size
    if m == 0:
        return ProgramResult(np.zeros(n), 0.0, 0.0, np.zeros(b.size), 0, True, "empty")
    if np.any(np.asarray(A.sum(axis=1)).ravel() <= 0):
        raise ValueError("a constraint row with positive demand has no support")
    if p == 1:
        res = _solve_lp(A, b_kept, w)
    else:
        res = _solve_smooth(A, b_kept, w, p, max_iter, gap_tol, polish_every)
    lam = np.zeros(b.size)
    lam[keep] = res.lam
    res.lam = lam
    return res


def _solve_lp(A: sparse.csr_matrix, b: np.ndarray, w: np.ndarray) -> ProgramResult:
    out = linprog(w, A_ub=-A, b_ub=-b, bounds=(0, None), method="highs")
    if out.status != 0:
        raise RuntimeError(f"linear program failed: {out.message}")
    lam = -np.asarray(out.ineqlin.marginals)
    dual_value = float(b @ lam)
    return ProgramResult(np.maximum(out.x, 0.0), float(out.fun), dual_value, lam, int(out.nit), True, "lp-highs")


def _solve_smooth(A, b, w, p, max_iter, gap_tol, polish_every) -> ProgramResult:
    dual = _Dual(A, b, w, p)
    lam = _initial_lambda(dual)
    best_lam, best_D = lam.copy(), dual.value(lam)
    best_P, best_x = dual.primal(dual.x_of(lam))
    it = 0

    def rel_gap() -> float:
        return (best_P - best_D) / max(abs(best_P), 1e-300)

    def consider(cand: np.ndarray) -> None:
        nonlocal best_lam, best_D, best_P, best_x
        x = dual.x_of(cand)
        D = dual.value(cand, x)
        if D > best_D:
            best_lam, best_D = cand.copy(), D
        P, xs = dual.primal(x)
        if P < best_P:
            best_P, best_x = P, xs

    def done() -> bool:
        return rel_gap() <= gap_tol and _feasible(A, best_x, b)

    # quasi-Newton warm start on the bound-constrained dual
    warm = minimize(
        lambda l: (-dual.value(l), -(b - A @ dual.x_of(l))),
        lam,
        jac=True,
        method="L-BFGS-B",
        bounds=[(0, None)] * b.size,
        options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": min(max_iter, 5000)},
    )
    it += int(warm.nit)
    consider(np.maximum(warm.x, 0.0))
    consider(_newton_polish(dual, best_lam))
    lam = best_lam.copy()
    while not done() and it < max_iter:
        # Polyak ascent towards the best known primal value
        for _ in range(polish_every):
            it += 1
            x = dual.x_of(lam)
            grad = b - A @ x
            D = dual.value(lam, x)
            gg = float(grad @ grad)
            if gg == 0:
                break
            lam = np.maximum(lam + (best_P - D) / gg * grad, 0.0)
            consider(lam)
            if it >= max_iter:
                break
        consider(_newton_polish(dual, best_lam))
    return ProgramResult(best_x, best_P, best_D, best_lam, it, rel_gap() <= gap_tol, "lbfgs+newton+polyak")


def _feasible(A, x, b) -> bool:
    return bool(np.all(A @ x >= b * (1 - FEAS_TOL)))


# -- public solvers -----------------------------------------------------------


def p_modulus(
    space: MetricMeasureSpace,
    family: CurveFamily,
    p: float,
    *,
    max_iter: int = MAX_ITER,
    gap_tol: float = GAP_TOL,
) -> ModulusSolution:
    """``Mod_p`` of a finite family: ``min sum rho^p w`` over densities with
    trapezoid integral at least 1 on every curve."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if not len(family):
        return ModulusSolution(p, 0.0, np.zeros(space.n), float("inf"), 0, 0.0, True, [], "empty")
    A = family_matrix(family, space.n)
    res = solve_covering_program(A, np.ones(len(family)), space.weights, p, max_iter=max_iter, gap_tol=gap_tol)
    integrals = A @ res.x
    active = np.flatnonzero(res.lam > 1e-12 * max(res.lam.max(initial=0.0), 1e-300)).tolist()
    cert = {"primal": res.value, "dual": res.dual_value}
    if res.method == "lp-highs":
        cert["lp_duals"] = res.lam.tolist()
    return ModulusSolution(
        p=p,
        value=res.value,
        density=res.x,
        min_curve_integral=float(integrals.min()),
        iterations=res.iterations,
        dual_gap=res.gap,
        converged=res.converged,
        active=active,
        method=res.method,
        certificate=cert,
    )


def minimal_upper_gradient_edge(space: MetricMeasureSpace, u: np.ndarray, p: float = 2.0) -> GradientSolution:
    """Edge oracle ``g(e) = |u(a) - u(b)| / len(e)``.

    ``g_vertex`` lifts it to points by the maximum over incident edges; the
    lift is an upper gradient for every edge path under the trapezoid rule,
    and ``objective`` is its ``L^p`` norm.
    """
    if not space.has_edges:
        raise ValueError("edge oracle needs a graph")
    u = space.check_function(u)
    e, ln = space.edge_index, space.edge_length
    if np.any(ln <= 0):
        raise ValueError("zero-length edge")
    g = np.abs(u[e[:, 0]] - u[e[:, 1]]) / ln
    gv = np.zeros(space.n)
    np.maximum.at(gv, e[:, 0], g)
    np.maximum.at(gv, e[:, 1], g)
    return GradientSolution(
        mode="edge-oracle",
        g=g,
        objective=space.lp_norm(gv, p),
        binding_constraints=list(range(len(g))),
        p=p,
        g_vertex=gv,
    )


def edge_family(space: MetricMeasureSpace) -> CurveFamily:
    """One two-vertex curve per stored edge."""
    return CurveFamily(tuple(make_curve(space, [a, b]) for (a, b) in sorted(space.edge_lookup) if a != b), "explicit")


def default_gradient_family(space: MetricMeasureSpace, pairs: int = 20, k: int = 2, seed: int = 0) -> CurveFamily:
    """All edges plus ``k`` shortest paths between ``pairs`` sampled point pairs."""
    fam = edge_family(space)
    rng = np.random.default_rng(seed)
    for _ in range(pairs):
        a, b = rng.choice(space.n, size=2, replace=False)
        fam = fam.union(enumerate_family(space, "k-shortest", terminals=([int(a)], [int(b)]), k=k))
    return fam


def minimal_upper_gradient_vertex(
    space: MetricMeasureSpace,
    u: np.ndarray,
    p: float,
    family: CurveFamily | None = None,
    *,
    max_iter: int = MAX_ITER,
    gap_tol: float = GAP_TOL,
) -> GradientSolution:
    """Smallest ``||g||_p`` over point functions ``g >= 0`` that are upper
    gradients of ``u`` along every curve of the family."""
    u = space.check_function(u)
    family = default_gradient_family(space) if family is None else family
    have = {tuple(sorted(c.endpoints)) for c in family.curves if c.m == 1}
    missing = [key for key in space.edge_lookup if key[0] != key[1] and key not in have]
    if missing:
        raise ValueError(f"family lacks {len(missing)} single-edge curves, e.g. {missing[0]}")
    A = family_matrix(family, space.n)
    ends = np.array([c.endpoints for c in family.curves]).reshape(-1, 2)
    b = np.abs(u[ends[:, 0]] - u[ends[:, 1]])
    res = solve_covering_program(A, b, space.weights, p, max_iter=max_iter, gap_tol=gap_tol)
    slack = A @ res.x - b
    binding = np.flatnonzero((b > 0) & (slack <= 1e-7 * np.maximum(b, 1.0))).tolist()
    return GradientSolution(
        mode="vertex-optimized",
        g=res.x,
        objective=res.value ** (1.0 / p),
        binding_constraints=binding,
        p=p,
        dual_gap=res.gap,
        converged=res.converged,
    )


# -- separation and column generation ----------------------------------------


@dataclass
class SeparationResult:
    curve: Curve
    integral: float

    @property
    def admissible(self) -> bool:
        """``integral >= 1`` certifies the density on every connecting path."""
        return self.integral >= 1 - FEAS_TOL


def separation_oracle(space: MetricMeasureSpace, rho: np.ndarray, terminals) -> SeparationResult:
    """Cheapest terminal-connecting path under edge cost ``len * (rho(a) + rho(b)) / 2``."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("density must be nonnegative")
    src, dst = (sorted({int(x) for x in side}) for side in terminals)
    if not src or not dst:
        raise CurveError("empty terminal set")
    G = to_networkx(space)
    for a, b, data in G.edges(data=True):
        data["cost"] = data["length"] * (rho[a] + rho[b]) / 2
    dist, paths = nx.multi_source_dijkstra(G, src, weight="cost")
    reach = [(dist[t], tuple(paths[t])) for t in dst if t in dist and len(paths[t]) > 1]
    if not reach:
        raise DisconnectedTerminals("terminal sets are not connected")
    cost, path = min(reach)
    curve = make_curve(space, path)
    return SeparationResult(curve, float(cost))


def modulus_connecting(
    space: MetricMeasureSpace,
    terminals,
    p: float,
    *,
    max_rounds: int = 200,
) -> tuple[ModulusSolution, CurveFamily]:
    """Modulus of all paths joining the terminal sets by column generation.

    Each round solves the current finite family and adds the cheapest
    path under the current density. Stops once every path has integral
    at least one, which certifies the density for the whole family.
    """
    sep = separation_oracle(space, np.zeros(space.n), terminals)
    family = CurveFamily((sep.curve,), "explicit", None)
    for _ in range(max_rounds):
        sol = p_modulus(space, family, p)
        sep = separation_oracle(space, sol.density, terminals)
        sol.certificate["separation_integral"] = sep.integral
        if sep.admissible:
            return sol, family
        family = family.union(CurveFamily((sep.curve,)))
    sol.converged = False
    return sol, family


def verify_edge_oracle(space: MetricMeasureSpace, u: np.ndarray, family: CurveFamily):
    """Upper-gradient slack of the lifted edge oracle along ``family``."""
    return check_upper_gradient(u, minimal_upper_gradient_edge(space, u).g_vertex, family)
