"""Finite metric-measure spaces.

A space is a finite point set with a metric and strictly positive point
weights; the weights are the atoms of the measure, so every integral in the
package is a weighted sum. Three metric modes are supported:

* ``euclidean``: distances from coordinates,
* ``explicit-matrix``: a user supplied distance matrix,
* ``graph-shortest-path``: shortest-path distances over a weighted edge list.

Euclidean spaces may also carry an edge list (for example the lattice edges
of a grid). The edges are then used by the curve and gradient machinery but
do not change the metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path
from scipy.spatial.distance import cdist

EUCLIDEAN = "euclidean"
MATRIX = "explicit-matrix"
GRAPH = "graph-shortest-path"

_MODE_ALIASES = {
    "euclidean": EUCLIDEAN,
    "explicit-matrix": MATRIX,
    "matrix": MATRIX,
    "graph-shortest-path": GRAPH,
    "graph": GRAPH,
}

TRIANGLE_TOL = 1e-9


class SpaceError(ValueError):
    """Raised when a space fails validation."""


def canonical_mode(mode: str) -> str:
    try:
        return _MODE_ALIASES[mode]
    except KeyError:
        raise SpaceError(f"unknown metric mode {mode!r}") from None


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MetricMeasureSpace:
    """Immutable weighted finite metric space.

    Points are addressed by their index ``0..n-1``; ``ids`` keeps the
    external identifiers for I/O. ``edge_index``/``edge_length`` hold the
    optional edge list.
    """

    ids: tuple
    weights: np.ndarray
    metric_mode: str = EUCLIDEAN
    coords: np.ndarray | None = None
    edge_index: np.ndarray | None = None
    edge_length: np.ndarray | None = None
    matrix: np.ndarray | None = field(default=None, repr=False)
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "metric_mode", canonical_mode(self.metric_mode))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        object.__setattr__(self, "weights", _frozen(w))
        if len(self.ids) != w.size:
            raise SpaceError("ids and weights differ in length")
        if w.size == 0:
            raise SpaceError("empty space")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise SpaceError("weights must be finite and strictly positive")
        if self.coords is not None:
            c = np.asarray(self.coords, dtype=float)
            if c.ndim == 1:
                c = c[:, None]
            if c.shape[0] != w.size:
                raise SpaceError("coords and weights differ in length")
            object.__setattr__(self, "coords", _frozen(c))
        if self.edge_index is not None:
            e = np.asarray(self.edge_index, dtype=np.int64).reshape(-1, 2)
            ln = np.asarray(self.edge_length, dtype=float).reshape(-1)
            if e.shape[0] != ln.size:
                raise SpaceError("edge_index and edge_length differ in length")
            if e.size and (e.min() < 0 or e.max() >= w.size):
                raise SpaceError("edge endpoint out of range")
            if np.any(ln <= 0) or not np.all(np.isfinite(ln)):
                raise SpaceError("edge lengths must be finite and positive")
            object.__setattr__(self, "edge_index", _frozen(e))
            object.__setattr__(self, "edge_length", _frozen(ln))
        if self.matrix is not None:
            object.__setattr__(self, "matrix", _frozen(np.asarray(self.matrix, dtype=float)))
        if self.metric_mode == EUCLIDEAN and self.coords is None:
            raise SpaceError("euclidean mode needs coords")
        if self.metric_mode == MATRIX and self.matrix is None:
            raise SpaceError("explicit-matrix mode needs a matrix")
        if self.metric_mode == GRAPH and self.edge_index is None and w.size > 1:
            raise SpaceError("graph mode needs edges")

    # -- basic quantities -------------------------------------------------

    @property
    def n(self) -> int:
        return self.weights.size

    def __len__(self) -> int:
        return self.n

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def has_edges(self) -> bool:
        return self.edge_index is not None and len(self.edge_index) > 0

    @cached_property
    def dist(self) -> np.ndarray:
        """Full pairwise distance matrix (read-only)."""
        if self.metric_mode == EUCLIDEAN:
            d = cdist(self.coords, self.coords)
        elif self.metric_mode == MATRIX:
            d = np.array(self.matrix, dtype=float)
        else:
            d = _graph_distances(self.n, self.edge_index, self.edge_length)
        np.fill_diagonal(d, 0.0)
        d.setflags(write=False)
        return d

    @cached_property
    def resolution(self) -> float:
        """Smallest nonzero interpoint distance (0 for a single point)."""
        if self.n == 1:
            return 0.0
        d = self.dist
        pos = d[d > 0]
        return float(pos.min()) if pos.size else 0.0

    @cached_property
    def diameter(self) -> float:
        return float(self.dist.max())

    @cached_property
    def _cover_cache(self) -> dict:
        return {}

    @cached_property
    def edge_lookup(self) -> dict[tuple[int, int], int]:
        """Map ``(min(a, b), max(a, b))`` to the edge row."""
        if not self.has_edges:
            return {}
        out: dict[tuple[int, int], int] = {}
        for row, (a, b) in enumerate(self.edge_index.tolist()):
            key = (a, b) if a <= b else (b, a)
            if key in out and self.edge_length[out[key]] <= self.edge_length[row]:
                continue
            out[key] = row
        return out

    @cached_property
    def degree(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        if self.has_edges:
            np.add.at(deg, self.edge_index[:, 0], 1)
            np.add.at(deg, self.edge_index[:, 1], 1)
        return deg

    def lp_norm(self, u: np.ndarray, p: float) -> float:
        """Weighted L^p norm ``(sum |u|^p w)^(1/p)``."""
        u = np.abs(np.asarray(u, dtype=float))
        return float(np.sum(u**p * self.weights) ** (1.0 / p))

    def check_function(self, u: Any, *, allow_inf: bool = False) -> np.ndarray:
        """Coerce ``u`` to a per-point float vector on this space."""
        a = np.asarray(u, dtype=float).reshape(-1)
        if a.size != self.n:
            raise SpaceError(f"function has {a.size} values, space has {self.n} points")
        if not allow_inf and not np.all(np.isfinite(a)):
            raise SpaceError("function values must be finite")
        return a

    def validate(self, *, seed: int = 0, max_triples: int = 200_000) -> None:
        """Check metric axioms. Triangle inequality is exhaustive for small
        spaces and sampled otherwise."""
        d = self.dist
        if not np.all(np.isfinite(d)):
            raise SpaceError("metric has infinite distances (disconnected graph?)")
        if np.any(d < 0):
            raise SpaceError("negative distance")
        if not np.allclose(d, d.T, rtol=0, atol=1e-12):
            i, j = np.unravel_index(np.argmax(np.abs(d - d.T)), d.shape)
            raise SpaceError(f"asymmetric matrix at ({i}, {j})")
        n = self.n
        if n < 3:
            return
        if n**3 <= max_triples:
            viol = d[:, None, :] - (d[:, :, None] + d[None, :, :])
            worst = float(viol.max())
            if worst > TRIANGLE_TOL:
                i, k, j = np.unravel_index(np.argmax(viol), viol.shape)
                raise SpaceError(
                    f"triangle inequality violated: d({i},{j}) > d({i},{k}) + d({k},{j}) by {worst:.3g}"
                )
            return
        rng = np.random.default_rng(seed)
        i, j, k = rng.integers(0, n, size=(3, max_triples))
        excess = d[i, j] - d[i, k] - d[k, j]
        if excess.max() > TRIANGLE_TOL:
            t = int(np.argmax(excess))
            raise SpaceError(
                f"triangle inequality violated on sampled triple ({i[t]},{k[t]},{j[t]})"
            )


def _graph_distances(n: int, edge_index: np.ndarray | None, edge_length: np.ndarray | None) -> np.ndarray:
    if n == 1 or edge_index is None:
        return np.zeros((n, n))
    # coo would sum duplicate edges; keep the shortest copy instead
    a = _min_duplicates(n, edge_index, edge_length)
    return shortest_path(a, method="D", directed=False)


def _min_duplicates(n: int, edge_index: np.ndarray, edge_length: np.ndarray):
    best: dict[tuple[int, int], float] = {}
    for (a, b), ln in zip(edge_index.tolist(), edge_length.tolist()):
        key = (a, b) if a <= b else (b, a)
        if a == b:
            continue
        if key not in best or ln < best[key]:
            best[key] = ln
    if not best:
        return coo_matrix((n, n)).tocsr()
    rows, cols = zip(*best.keys())
    return coo_matrix((list(best.values()), (rows, cols)), shape=(n, n)).tocsr()


# -- generators -------------------------------------------------------------


def _lattice_edges_1d(n: int) -> np.ndarray:
    i = np.arange(n - 1)
    return np.stack([i, i + 1], axis=1)


def generate_space(kind: str, **params: Any) -> MetricMeasureSpace:
    """Build one of the canonical test spaces.

    ``grid1d(n)``
        ``n`` equispaced points of [0, 1], weight ``1/n``, lattice edges.
    ``grid2d(nx, ny)``
        tensor grid of [0, 1]^2, weight ``1/(nx*ny)``, 4-neighbour edges.
    ``circle(n, radius=1)``
        ``n`` equispaced points of a circle with the geodesic (arc) metric,
        weight ``1/n``.
    ``weighted_graph(edges, weights="unit", n=None)``
        explicit graph; ``edges`` is a list of ``(a, b, length)`` and
        ``weights`` one of ``"unit"``, ``"arclength"`` (half the incident
        edge lengths, the trapezoid quadrature of arc length) or a sequence.
    """
    if kind == "grid1d":
        n = int(params.get("n", 0))
        if n < 2:
            raise SpaceError("grid1d needs n >= 2")
        x = np.linspace(0.0, 1.0, n)
        e = _lattice_edges_1d(n)
        return MetricMeasureSpace(
            ids=tuple(range(n)),
            weights=np.full(n, 1.0 / n),
            metric_mode=EUCLIDEAN,
            coords=x[:, None],
            edge_index=e,
            edge_length=np.abs(x[e[:, 1]] - x[e[:, 0]]),
            name=f"grid1d({n})",
        )
    if kind == "grid2d":
        nx = int(params.get("nx", params.get("n", 0)))
        ny = int(params.get("ny", nx))
        if nx < 2 or ny < 2:
            raise SpaceError("grid2d needs nx, ny >= 2")
        xs = np.linspace(0.0, 1.0, nx)
        ys = np.linspace(0.0, 1.0, ny)
        # row-major: index = row * nx + col, x varies along a row
        X, Y = np.meshgrid(xs, ys)
        coords = np.stack([X.ravel(), Y.ravel()], axis=1)
        idx = np.arange(nx * ny).reshape(ny, nx)
        horiz = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
        vert = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
        e = np.concatenate([horiz, vert])
        ln = np.linalg.norm(coords[e[:, 0]] - coords[e[:, 1]], axis=1)
        return MetricMeasureSpace(
            ids=tuple(range(nx * ny)),
            weights=np.full(nx * ny, 1.0 / (nx * ny)),
            metric_mode=EUCLIDEAN,
            coords=coords,
            edge_index=e,
            edge_length=ln,
            name=f"grid2d({nx},{ny})",
        )
    if kind == "circle":
        n = int(params.get("n", 0))
        radius = float(params.get("radius", 1.0))
        if n < 2:
            raise SpaceError("circle needs n >= 2")
        if radius <= 0:
            raise SpaceError("circle radius must be positive")
        theta = 2 * np.pi * np.arange(n) / n
        i = np.arange(n)
        e = np.stack([i, (i + 1) % n], axis=1)
        if n == 2:
            e = e[:1]
        arc = 2 * np.pi * radius / n
        return MetricMeasureSpace(
            ids=tuple(range(n)),
            weights=np.full(n, 1.0 / n),
            metric_mode=GRAPH,
            coords=radius * np.stack([np.cos(theta), np.sin(theta)], axis=1),
            edge_index=e,
            edge_length=np.full(len(e), arc),
            name=f"circle({n},{radius:g})",
        )
    if kind == "weighted_graph":
        return weighted_graph(params["edges"], weights=params.get("weights", "unit"), n=params.get("n"))
    raise SpaceError(f"unknown space kind {kind!r}")


def weighted_graph(
    edges: Sequence[Sequence[float]],
    weights: str | Sequence[float] = "unit",
    n: int | None = None,
    name: str = "weighted_graph",
) -> MetricMeasureSpace:
    e = np.asarray([(int(a), int(b)) for a, b, _ in edges], dtype=np.int64).reshape(-1, 2)
    ln = np.asarray([float(c) for _, _, c in edges], dtype=float)
    if n is None:
        n = int(e.max()) + 1 if e.size else 1
    if isinstance(weights, str):
        if weights == "unit":
            w = np.ones(n)
        elif weights == "arclength":
            w = np.zeros(n)
            np.add.at(w, e[:, 0], ln / 2)
            np.add.at(w, e[:, 1], ln / 2)
        else:
            raise SpaceError(f"unknown weight rule {weights!r}")
    else:
        w = np.asarray(weights, dtype=float)
    space = MetricMeasureSpace(
        ids=tuple(range(n)),
        weights=w,
        metric_mode=GRAPH,
        edge_index=e,
        edge_length=ln,
        name=name,
    )
    if not np.all(np.isfinite(space.dist)):
        raise SpaceError("graph is disconnected")
    return space


def path_graph(lengths: Sequence[float], weights: str | Sequence[float] = "arclength", offset: int = 0) -> MetricMeasureSpace:
    """Path ``0-1-...-m`` with the given edge lengths."""
    edges = [(i, i + 1, L) for i, L in enumerate(lengths)]
    return weighted_graph(edges, weights=weights, name=f"path({len(lengths)})")


def from_points(coords: np.ndarray, weights: np.ndarray | None = None, ids: Sequence | None = None) -> MetricMeasureSpace:
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 1:
        coords = coords[:, None]
    n = coords.shape[0]
    return MetricMeasureSpace(
        ids=tuple(ids) if ids is not None else tuple(range(n)),
        weights=np.ones(n) if weights is None else np.asarray(weights, dtype=float),
        metric_mode=EUCLIDEAN,
        coords=coords,
    )


def from_matrix(matrix: np.ndarray, weights: np.ndarray | None = None, ids: Sequence | None = None) -> MetricMeasureSpace:
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    space = MetricMeasureSpace(
        ids=tuple(ids) if ids is not None else tuple(range(n)),
        weights=np.ones(n) if weights is None else np.asarray(weights, dtype=float),
        metric_mode=MATRIX,
        matrix=matrix,
    )
    space.validate()
    return space


def with_adjacency(space: MetricMeasureSpace, scale: float) -> MetricMeasureSpace:
    """Copy of ``space`` with edges joining points at distance ``<= scale``."""
    d = space.dist
    i, j = np.nonzero(np.triu(d <= scale * (1 + 1e-12), k=1))
    return MetricMeasureSpace(
        ids=space.ids,
        weights=space.weights,
        metric_mode=space.metric_mode,
        coords=space.coords,
        edge_index=np.stack([i, j], axis=1),
        edge_length=d[i, j],
        matrix=space.matrix,
        name=space.name,
    )


def dyadic_ladder(space: MetricMeasureSpace, lo: float | None = None, hi: float | None = None) -> np.ndarray:
    """Radii ``2^-j`` inside ``[lo, hi]`` (defaults: resolution, diameter),
    in decreasing order."""
    lo = space.resolution if lo is None else lo
    hi = space.diameter if hi is None else hi
    if hi <= 0 or lo <= 0 or lo > hi:
        return np.zeros(0)
    j_lo = math.ceil(-math.log2(hi) - 1e-12)
    j_hi = math.floor(-math.log2(lo) + 1e-12)
    return np.array([2.0**-j for j in range(j_lo, j_hi + 1)])
