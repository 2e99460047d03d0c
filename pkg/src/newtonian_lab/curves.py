"""Polygonal curves, line integrals, upper-gradient checks and curve families.

A curve is a chain of point indices with positive segment lengths measured
in the space's metric. Densities live on points and are integrated with the
trapezoid rule, so a curve integral is linear in the density with weights
``segment / 2`` at both ends of every segment.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import networkx as nx
import numpy as np
from scipy import sparse

from ._parallel import parallel_map
from .covering import BallCover
from .gradient import S_k, tk_pointwise
from .space import MetricMeasureSpace, with_adjacency

SLACK_TOL = 1e-9
GENERATORS = ("explicit", "all-simple-paths", "k-shortest", "grid-rows")
DEFAULT_MAX_CURVES = 10_000


class CurveError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Curve:
    vertices: tuple[int, ...]
    segment_lengths: np.ndarray
    length: float

    @property
    def endpoints(self) -> tuple[int, int]:
        return self.vertices[0], self.vertices[-1]

    @property
    def m(self) -> int:
        """Number of segments."""
        return len(self.vertices) - 1

    def reversed(self) -> Curve:
        seg = self.segment_lengths[::-1].copy()
        seg.setflags(write=False)
        return Curve(self.vertices[::-1], seg, self.length)

    def cumulative(self) -> np.ndarray:
        """Arc-length parameter at each vertex."""
        return np.concatenate([[0.0], np.cumsum(self.segment_lengths)])


def make_curve(space: MetricMeasureSpace, vertices: Sequence[int]) -> Curve:
    v = tuple(int(x) for x in vertices)
    if len(v) < 2:
        raise CurveError("a curve needs at least two vertices")
    if min(v) < 0 or max(v) >= space.n:
        raise CurveError("curve vertex out of range")
    seg = space.dist[list(v[:-1]), list(v[1:])].astype(float)
    if np.any(seg <= 0):
        raise CurveError("zero-length segment")
    seg.setflags(write=False)
    return Curve(v, seg, float(seg.sum()))


def concatenate(a: Curve, b: Curve) -> Curve:
    if a.vertices[-1] != b.vertices[0]:
        raise CurveError("curves do not share an endpoint")
    seg = np.concatenate([a.segment_lengths, b.segment_lengths])
    seg.setflags(write=False)
    return Curve(a.vertices + b.vertices[1:], seg, float(seg.sum()))


@dataclass(frozen=True, eq=False)
class CurveFamily:
    curves: tuple[Curve, ...]
    generator: str = "explicit"
    terminals: tuple[tuple[int, ...], tuple[int, ...]] | None = None

    def __len__(self) -> int:
        return len(self.curves)

    def __iter__(self):
        return iter(self.curves)

    def union(self, other: CurveFamily) -> CurveFamily:
        seen = {c.vertices for c in self.curves}
        extra = tuple(c for c in other.curves if c.vertices not in seen)
        return CurveFamily(self.curves + extra, "explicit")

    def to_json(self, space: MetricMeasureSpace) -> dict:
        ids = space.ids
        out: dict = {
            "generator": self.generator,
            "curves": [[ids[v] for v in c.vertices] for c in self.curves],
        }
        if self.terminals is not None:
            out["terminals"] = [[ids[v] for v in t] for t in self.terminals]
        return out


def family_from_paths(space: MetricMeasureSpace, paths: Iterable[Sequence[int]], generator: str = "explicit") -> CurveFamily:
    return CurveFamily(tuple(make_curve(space, p) for p in paths), generator)


def load_family(space: MetricMeasureSpace, data: dict | list | str) -> CurveFamily:
    """Family from JSON: either a list of id sequences or ``{"curves": ...}``."""
    if isinstance(data, str):
        with open(data) as fh:
            data = json.load(fh)
    if isinstance(data, list):
        data = {"curves": data}
    index = {pid: i for i, pid in enumerate(space.ids)}
    # ids survive a JSON round trip as strings when the space used ints
    index.update({str(pid): i for i, pid in enumerate(space.ids)})
    try:
        paths = [[index[v] for v in path] for path in data["curves"]]
    except KeyError as exc:
        raise CurveError(f"unknown point id {exc.args[0]!r} in family") from None
    terminals = data.get("terminals")
    if terminals is not None:
        terminals = tuple(tuple(index[v] for v in side) for side in terminals)
    return CurveFamily(
        tuple(make_curve(space, p) for p in paths),
        data.get("generator", "explicit"),
        terminals,
    )


# -- integrals ----------------------------------------------------------------


def line_integral(curve: Curve, rho: np.ndarray) -> float:
    """Trapezoid rule on vertex values: ``sum seg * (rho(a) + rho(b)) / 2``."""
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(curve.vertices)
    return float(np.dot(curve.segment_lengths, (rho[v[:-1]] + rho[v[1:]]) / 2))


def trapezoid_weights(curve: Curve, n: int) -> np.ndarray:
    """Vector ``a`` with ``line_integral(curve, rho) = a @ rho``."""
    a = np.zeros(n)
    v = np.asarray(curve.vertices)
    half = curve.segment_lengths / 2
    np.add.at(a, v[:-1], half)
    np.add.at(a, v[1:], half)
    return a


def family_matrix(family: CurveFamily, n: int) -> sparse.csr_matrix:
    """``(len(family), n)`` sparse matrix of trapezoid weights."""
    rows, cols, vals = [], [], []
    for r, c in enumerate(family.curves):
        v = np.asarray(c.vertices)
        half = c.segment_lengths / 2
        rows.append(np.full(2 * c.m, r))
        cols.append(np.concatenate([v[:-1], v[1:]]))
        vals.append(np.concatenate([half, half]))
    if not rows:
        return sparse.csr_matrix((0, n))
    A = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(family), n),
    )
    return A.tocsr()


# -- slack reports ------------------------------------------------------------


@dataclass
class SlackReport:
    slacks: np.ndarray
    skipped: int = 0
    tol: float = SLACK_TOL
    certified: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def min_slack(self) -> float:
        return float(self.slacks.min()) if self.slacks.size else float("inf")

    @property
    def violations(self) -> list[int]:
        return np.flatnonzero(self.slacks < -self.tol).tolist()

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        out = {
            "checked": int(self.slacks.size),
            "skipped": self.skipped,
            "min_slack": self.min_slack if self.slacks.size else None,
            "violations": self.violations,
            "tol": self.tol,
            "pass": self.ok,
        }
        if self.certified is not None:
            out["uncertified"] = np.flatnonzero(~self.certified).tolist()
        out.update(self.extra)
        return out


def _endpoint_values(family: CurveFamily, u: np.ndarray) -> np.ndarray:
    if not len(family):
        return np.zeros(0)
    ends = np.array([c.endpoints for c in family.curves])
    return np.abs(u[ends[:, 0]] - u[ends[:, 1]])


def check_upper_gradient(u: np.ndarray, g: np.ndarray, family: CurveFamily, tol: float = SLACK_TOL) -> SlackReport:
    """Per curve ``int_gamma g ds - |u(first) - u(last)|``."""
    u = np.asarray(u, dtype=float)
    g = np.asarray(g, dtype=float)
    integrals = np.array(parallel_map(lambda c: line_integral(c, g), family.curves))
    return SlackReport(integrals - _endpoint_values(family, u), tol=tol)


def arc_partition(curve: Curve, dist: np.ndarray, radius: float) -> list[tuple[int, int]] | None:
    """Split ``curve`` into arcs that each certify the ball-average estimate.

    An arc between vertex positions ``i < j`` qualifies when either

    * ``j = i + 1``, the segment is shorter than ``radius`` and at least
      ``radius / 4`` long, or
    * every vertex of the arc is closer than ``radius`` to both arc ends and
      the arc length is at least ``radius / 2``.

    In both cases the cells of the arc ends and of every arc vertex are
    equal or neighbours, which bounds the jump of ``S_k u`` across the arc by
    four times the trapezoid integral of ``|T_k u|_p`` over it. Returns the
    arcs as position pairs, or ``None`` when no partition exists.
    """
    v = np.asarray(curve.vertices)
    m = len(v) - 1
    L = curve.cumulative()
    close = dist[np.ix_(v, v)] < radius
    ones = np.ones_like(close)
    # fwd[i, j]: every v[i..j] close to v[i]
    fwd = np.logical_and.accumulate(close | np.tril(ones, -1), axis=1)
    # back[j, i]: every v[i..j] close to v[j]
    back = np.flip(np.logical_and.accumulate(np.flip(close | np.triu(ones, 1), axis=1), axis=1), axis=1)
    span = L[None, :] - L[:, None]
    valid = np.triu(fwd & back.T & (span >= radius / 2), k=2)
    seg_ok = (curve.segment_lengths >= radius / 4) & close[np.arange(m), np.arange(1, m + 1)]
    valid[np.arange(m), np.arange(1, m + 1)] = seg_ok
    prev = np.full(m + 1, -1)
    reach = np.zeros(m + 1, dtype=bool)
    reach[0] = True
    for j in range(1, m + 1):
        src = np.flatnonzero(reach[:j] & valid[:j, j])
        if src.size:
            reach[j] = True
            prev[j] = src[-1]
    if not reach[m]:
        return None
    arcs = []
    j = m
    while j > 0:
        arcs.append((int(prev[j]), j))
        j = prev[j]
    return arcs[::-1]


def check_S_k_inequality(
    u: np.ndarray,
    cover: BallCover,
    p: float,
    family: CurveFamily,
    factor: float = 4.0,
    tol: float = SLACK_TOL,
) -> SlackReport:
    """Per curve ``4 int_gamma |T_k u|_p ds - |S_k u(x) - S_k u(y)|``.

    Curves whose endpoints are closer than ``2^-k`` are outside the
    estimate's hypothesis; they are skipped and counted. Each checked curve
    also carries a flag telling whether an arc partition certifies it.
    """
    space = cover.space
    u = space.check_function(u)
    s = S_k(u, cover)
    rho = tk_pointwise(u, cover, p)
    r = cover.radius
    d = space.dist
    keep = [c for c in family.curves if d[c.endpoints] >= r * (1 - 1e-12)]

    def one(c: Curve) -> tuple[float, bool]:
        lhs = abs(s[c.endpoints[0]] - s[c.endpoints[1]])
        return factor * line_integral(c, rho) - lhs, arc_partition(c, d, r) is not None

    res = parallel_map(one, keep)
    slacks = np.array([x[0] for x in res], dtype=float)
    cert = np.array([x[1] for x in res], dtype=bool)
    return SlackReport(slacks, skipped=len(family) - len(keep), tol=tol, certified=cert, extra={"k": cover.k, "p": p})


# -- enumeration --------------------------------------------------------------


def to_networkx(space: MetricMeasureSpace) -> nx.Graph:
    """Undirected graph of the stored edges, keeping the shortest duplicate."""
    G = nx.Graph()
    G.add_nodes_from(range(space.n))
    for (a, b), row in space.edge_lookup.items():
        if a != b:
            G.add_edge(a, b, length=float(space.edge_length[row]))
    return G


def _graph_for(space: MetricMeasureSpace, adjacency_scale: float | None) -> tuple[MetricMeasureSpace, nx.Graph]:
    if not space.has_edges:
        if adjacency_scale is None:
            raise CurveError("space has no edges; supply an adjacency scale")
        space = with_adjacency(space, adjacency_scale)
    elif adjacency_scale is not None:
        space = with_adjacency(space, adjacency_scale)
    return space, to_networkx(space)


def _terminal_sets(terminals) -> tuple[tuple[int, ...], tuple[int, ...]]:
    if terminals is None:
        raise CurveError("terminals required")
    src, dst = (tuple(sorted({int(x) for x in side})) for side in terminals)
    if not src or not dst:
        raise CurveError("empty terminal set")
    return src, dst


def _path_length(G: nx.Graph, path: Sequence[int]) -> float:
    return float(sum(G.edges[a, b]["length"] for a, b in zip(path[:-1], path[1:])))


def enumerate_family(
    space: MetricMeasureSpace,
    generator: str,
    *,
    terminals=None,
    hop_limit: int | None = None,
    k: int = 1,
    paths: Sequence[Sequence[int]] | None = None,
    adjacency_scale: float | None = None,
    max_curves: int = DEFAULT_MAX_CURVES,
    include_columns: bool = False,
) -> CurveFamily:
    """Deterministic curve family.

    ``explicit``
        the given ``paths``.
    ``all-simple-paths``
        every simple path from a source to a sink with at most ``hop_limit``
        edges, sorted by ``(length, vertices)``.
    ``k-shortest``
        for every (source, sink) pair the ``k`` shortest simple paths, ties
        broken lexicographically on the vertex sequence.
    ``grid-rows``
        the rows (and optionally columns) of a planar grid, ordered by the
        first coordinate.
    """
    if generator not in GENERATORS:
        raise CurveError(f"unknown generator {generator!r}")
    if generator == "explicit":
        if paths is None:
            raise CurveError("explicit family needs paths")
        return family_from_paths(space, paths)
    if generator == "grid-rows":
        return _grid_rows(space, include_columns)
    gspace, G = _graph_for(space, adjacency_scale)
    src, dst = _terminal_sets(terminals)
    out: list[tuple[float, tuple[int, ...]]] = []
    if generator == "all-simple-paths":
        if hop_limit is not None and hop_limit < 1:
            raise CurveError("hop limit must be >= 1")
        for s in src:
            targets = [t for t in dst if t != s]
            if not targets:
                continue
            for path in nx.all_simple_paths(G, s, targets, cutoff=hop_limit):
                out.append((_path_length(G, path), tuple(path)))
                if len(out) > max_curves:
                    raise CurveError(f"family exceeds {max_curves} curves; lower the hop limit")
    else:
        if k < 1:
            raise CurveError("k must be >= 1")
        for s, t in itertools.product(src, dst):
            if s == t or not nx.has_path(G, s, t):
                continue
            out.extend(_k_shortest(G, s, t, k))
            if len(out) > max_curves:
                raise CurveError(f"family exceeds {max_curves} curves")
    out.sort()
    curves = tuple(make_curve(space, p) for _, p in out)
    return CurveFamily(curves, generator, (src, dst))


def _k_shortest(G: nx.Graph, s: int, t: int, k: int) -> list[tuple[float, tuple[int, ...]]]:
    """``k`` shortest simple paths; paths tied with the ``k``-th are all
    collected first so the lexicographic tie-break is exact."""
    found: list[tuple[float, tuple[int, ...]]] = []
    for path in nx.shortest_simple_paths(G, s, t, weight="length"):
        L = _path_length(G, path)
        if len(found) >= k and L > found[k - 1][0] * (1 + 1e-12):
            break
        found.append((L, tuple(path)))
        found.sort()
    return found[:k]


def _grid_rows(space: MetricMeasureSpace, include_columns: bool) -> CurveFamily:
    if space.coords is None or space.coords.shape[1] != 2:
        raise CurveError("grid-rows needs planar coordinates")
    c = np.round(space.coords, 12)
    paths = []
    for axis in (0, 1) if include_columns else (0,):
        other = 1 - axis
        for level in np.unique(c[:, other]):
            idx = np.flatnonzero(c[:, other] == level)
            if idx.size >= 2:
                paths.append(idx[np.argsort(c[idx, axis], kind="stable")].tolist())
    return CurveFamily(tuple(make_curve(space, p) for p in paths), "grid-rows")


# -- random curves for property checks ----------------------------------------


def random_walk_curve(
    space: MetricMeasureSpace,
    rng: np.random.Generator,
    steps: int,
    start: int | None = None,
    *,
    monotone_target: int | None = None,
    bias: float = 1.0,
) -> Curve:
    """Random walk along stored edges.

    With ``monotone_target`` each step, with probability ``bias``, strictly
    decreases the graph distance to the target and is otherwise uniform
    over the neighbours; the walk stops on arrival. ``bias = 1`` gives a
    geodesic (on grids: a monotone lattice path).
    """
    if not space.has_edges:
        raise CurveError("random walks need edges")
    nbrs = _adjacency_lists(space)
    x = int(rng.integers(space.n)) if start is None else int(start)
    path = [x]
    if monotone_target is not None:
        dt = space.dist[:, monotone_target]
    for _ in range(steps):
        cand = nbrs[x]
        if monotone_target is not None:
            if x == monotone_target:
                break
            if bias >= 1 or rng.random() < bias:
                cand = cand[dt[cand] < dt[x] - 1e-12]
        x = int(cand[rng.integers(cand.size)])
        path.append(x)
    if len(path) < 2:
        raise CurveError("walk did not move")
    return make_curve(space, path)


def _adjacency_lists(space: MetricMeasureSpace) -> list[np.ndarray]:
    cache = space._cover_cache
    key = ("adjacency",)
    if key not in cache:
        lists: list[list[int]] = [[] for _ in range(space.n)]
        for a, b in space.edge_lookup:
            if a != b:
                lists[a].append(b)
                lists[b].append(a)
        cache[key] = [np.array(sorted(x), dtype=np.int64) for x in lists]
    return cache[key]
