"""Generation-k ball covers with disjoint fifth-balls.

For a scale ``r = 2^-k`` the centers form a maximal ``2r/5``-separated set,
so the closed balls ``B(c, r/5)`` are pairwise disjoint and the balls
``B(c, r)`` cover the space. Cells ``A_i`` take each point into the first
ball that contains it, and two balls are neighbours when their set distance
is below ``r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .measure import balls_mask
from .space import MetricMeasureSpace


@dataclass(frozen=True, eq=False)
class BallCover:
    k: int
    radius: float
    centers: np.ndarray
    members: tuple[np.ndarray, ...]
    cells: tuple[np.ndarray, ...]
    neighbor_lists: tuple[np.ndarray, ...]
    N_k: int
    cell_of: np.ndarray
    space: MetricMeasureSpace = field(repr=False)
    start: int = 0

    @property
    def M(self) -> int:
        return len(self.centers)

    @cached_property
    def membership(self) -> np.ndarray:
        """``(M, n)`` boolean matrix, row ``i`` is ``B_i``."""
        m = np.zeros((self.M, self.space.n), dtype=bool)
        for i, mem in enumerate(self.members):
            m[i, mem] = True
        m.setflags(write=False)
        return m

    @cached_property
    def masses(self) -> np.ndarray:
        return self.membership @ self.space.weights

    @cached_property
    def cell_masses(self) -> np.ndarray:
        return np.bincount(self.cell_of, weights=self.space.weights, minlength=self.M)

    @cached_property
    def neighbor_counts(self) -> np.ndarray:
        return np.array([len(nb) for nb in self.neighbor_lists], dtype=np.int64)

    def padded(self, arity: int | None = None) -> np.ndarray:
        """``(M, arity)`` table of ``B_{i,j}``; slots past ``n_i`` repeat ``i``."""
        arity = self.N_k if arity is None else arity
        if arity < self.N_k:
            raise ValueError(f"arity {arity} below N_k = {self.N_k}")
        table = np.repeat(np.arange(self.M)[:, None], arity, axis=1)
        for i, nb in enumerate(self.neighbor_lists):
            table[i, : len(nb)] = nb
        return table

    def to_json(self) -> dict:
        ids = self.space.ids
        return {
            "k": self.k,
            "radius": self.radius,
            "centers": [ids[c] for c in self.centers.tolist()],
            "members": [[ids[x] for x in m.tolist()] for m in self.members],
            "cells": [[ids[x] for x in c.tolist()] for c in self.cells],
            "neighbors": [nb.tolist() for nb in self.neighbor_lists],
            "N_k": self.N_k,
        }


def select_centers(space: MetricMeasureSpace, radius: float, start: int = 0) -> np.ndarray:
    """Greedy farthest-point traversal from ``start``; stops once every point
    is within ``2 radius / 5`` of a chosen center. Returned sorted by index."""
    sep = 2.0 * radius / 5.0
    d = space.dist
    chosen = [start]
    mind = d[start].copy()
    while True:
        j = int(np.argmax(mind))
        if mind[j] <= sep:
            break
        chosen.append(j)
        np.minimum(mind, d[j], out=mind)
    return np.array(sorted(chosen), dtype=np.int64)


def set_distances(space: MetricMeasureSpace, member_mask: np.ndarray) -> np.ndarray:
    """``(M, M)`` matrix of ``min`` pairwise distances between point sets."""
    d = space.dist
    M = member_mask.shape[0]
    # distance from every point to each set
    to_set = np.empty((M, space.n))
    for i in range(M):
        to_set[i] = d[member_mask[i]].min(axis=0)
    out = np.empty((M, M))
    for j in range(M):
        out[:, j] = to_set[:, member_mask[j]].min(axis=1)
    return np.minimum(out, out.T)


def build_cover(space: MetricMeasureSpace, k: int, start: int = 0) -> BallCover:
    """Generation-``k`` cover of ``space`` by closed balls of radius ``2^-k``."""
    r = 2.0**-k
    centers = select_centers(space, r, start)
    mask = balls_mask(space, centers, r)
    members = tuple(np.flatnonzero(row) for row in mask)
    # first ball containing each point; coverage guarantees one exists
    cell_of = np.argmax(mask, axis=0).astype(np.int64)
    cells = tuple(np.flatnonzero(cell_of == i) for i in range(len(centers)))
    sd = set_distances(space, mask)
    adj = sd < r
    np.fill_diagonal(adj, False)
    neighbor_lists = tuple(np.flatnonzero(row) for row in adj)
    N_k = max((len(nb) for nb in neighbor_lists), default=0)
    for a in (centers, cell_of, *members, *cells, *neighbor_lists):
        a.setflags(write=False)
    return BallCover(
        k=k,
        radius=r,
        centers=centers,
        members=members,
        cells=cells,
        neighbor_lists=neighbor_lists,
        N_k=N_k,
        cell_of=cell_of,
        space=space,
        start=start,
    )


def get_cover(space: MetricMeasureSpace, k: int, start: int = 0) -> BallCover:
    """Cached :func:`build_cover`; covers are immutable so sharing is safe."""
    key = (k, start)
    cache = space._cover_cache
    if key not in cache:
        cache[key] = build_cover(space, k, start)
    return cache[key]


def neighbors_of(cover: BallCover, i: int) -> list[int]:
    if not 0 <= i < cover.M:
        raise IndexError(f"ball index {i} out of range (M = {cover.M})")
    return cover.neighbor_lists[i].tolist()


def lookup(cover: BallCover, x: int) -> tuple[int, list[int]]:
    """Ball ``B[x]`` and the padded list ``B[x, 1..N_k]``."""
    i = int(cover.cell_of[x])
    nb = cover.neighbor_lists[i].tolist()
    return i, nb + [i] * (cover.N_k - len(nb))


def overlap_counts(cover: BallCover, theta: float) -> np.ndarray:
    """Per point, the number of enlarged balls ``theta B_i`` containing it."""
    return balls_mask(cover.space, cover.centers, theta * cover.radius).sum(axis=0)


def admissible_window(space: MetricMeasureSpace, guard: float = 4.0) -> tuple[int, int]:
    """Generations with ``guard * resolution <= 2^-k <= diameter``.

    Below the lower end balls are nearly singletons and ``T_k`` degenerates.
    """
    if space.n == 1:
        return (0, 0)
    kmin = math.ceil(-math.log2(space.diameter) - 1e-12)
    kmax = math.floor(-math.log2(guard * space.resolution) + 1e-12)
    if kmax < kmin:
        raise ValueError("space has no admissible generation")
    return (kmin, kmax)


def clip_window(space: MetricMeasureSpace, window: tuple[int, int], guard: float = 4.0) -> tuple[int, int]:
    kmin, kmax = admissible_window(space, guard)
    lo, hi = max(window[0], kmin), min(window[1], kmax)
    if lo > hi:
        raise ValueError(f"window {window} is empty after clipping to [{kmin}, {kmax}]")
    return (lo, hi)


@dataclass
class CoverReport:
    checks: dict[str, bool]
    witnesses: dict[str, list]

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> dict:
        return {"checks": self.checks, "witnesses": self.witnesses, "ok": self.ok}


def validate_cover(cover: BallCover, max_witnesses: int = 10) -> CoverReport:
    """Check every structural invariant of a cover, with witnesses."""
    space = cover.space
    n, M, r = space.n, cover.M, cover.radius
    checks: dict[str, bool] = {}
    wit: dict[str, list] = {}
    mask = np.zeros((M, n), dtype=bool)
    for i, mem in enumerate(cover.members):
        mask[i, mem] = True

    orphans = np.flatnonzero(~mask.any(axis=0))
    checks["coverage"] = orphans.size == 0
    wit["coverage"] = orphans[:max_witnesses].tolist()

    c = cover.centers
    cd = space.dist[np.ix_(c, c)]
    bad = np.argwhere(np.triu(cd <= 2 * r / 5, k=1))
    checks["fifth_ball_disjoint"] = bad.size == 0
    wit["fifth_ball_disjoint"] = bad[:max_witnesses].tolist()

    ref = balls_mask(space, c, r)
    wrong = np.flatnonzero((ref != mask).any(axis=1))
    checks["members_are_balls"] = wrong.size == 0
    wit["members_are_balls"] = wrong[:max_witnesses].tolist()

    cell_mask = np.zeros((M, n), dtype=bool)
    for i, cell in enumerate(cover.cells):
        cell_mask[i, cell] = True
    counts = cell_mask.sum(axis=0)
    not_partition = np.flatnonzero(counts != 1)
    outside = np.flatnonzero((cell_mask & ~mask).any(axis=1))
    first = np.where(mask.any(axis=0), np.argmax(mask, axis=0), -1)
    wrong_cell = np.flatnonzero(first != np.asarray(cover.cell_of))
    cell_agree = np.flatnonzero(
        [cover.cell_of[x] != i for i, cell in enumerate(cover.cells) for x in cell]
    )
    checks["cells_partition"] = not_partition.size == 0
    wit["cells_partition"] = not_partition[:max_witnesses].tolist()
    checks["cells_inside_balls"] = outside.size == 0
    wit["cells_inside_balls"] = outside[:max_witnesses].tolist()
    checks["cell_of_minimal"] = wrong_cell.size == 0 and cell_agree.size == 0
    wit["cell_of_minimal"] = wrong_cell[:max_witnesses].tolist()

    adj = np.zeros((M, M), dtype=bool)
    for i, nb in enumerate(cover.neighbor_lists):
        adj[i, nb] = True
    asym = np.argwhere(adj != adj.T)
    checks["neighbors_symmetric"] = asym.size == 0
    wit["neighbors_symmetric"] = asym[:max_witnesses].tolist()
    selfs = np.flatnonzero(np.diag(adj))
    checks["neighbors_irreflexive"] = selfs.size == 0
    wit["neighbors_irreflexive"] = selfs[:max_witnesses].tolist()
    if M and mask.any(axis=1).all():
        sd = set_distances(space, mask)
        expect = sd < r
        np.fill_diagonal(expect, False)
        wrong_nb = np.argwhere(expect != adj)
    else:
        wrong_nb = np.zeros((0, 2), dtype=int)
    checks["neighbors_by_distance"] = wrong_nb.size == 0
    wit["neighbors_by_distance"] = wrong_nb[:max_witnesses].tolist()
    too_long = [i for i, nb in enumerate(cover.neighbor_lists) if len(nb) > cover.N_k]
    checks["arity_bound"] = not too_long
    wit["arity_bound"] = too_long[:max_witnesses]
    return CoverReport(checks, wit)


def neighbor_cap(C_d: float) -> int:
    """Packing bound on neighbour counts implied by a doubling constant.

    A neighbour of ``B(c, r)`` has its center within ``3r`` of ``c``, so the
    disjoint fifth-balls of all neighbours lie in ``B(c, 3.2 r)``, which is
    inside ``B(c_j, 2^5 r / 5)`` for each of them. Hence at most ``C_d^5``.
    """
    return int(math.floor(C_d**5 + 1e-9))


def overlap_cap(C_d: float, theta: float) -> int:
    """Doubling bound on ``sum_i chi_{theta B_i}``: the fifth-balls of the
    balls through ``x`` are disjoint inside ``B(x, (theta + 1/5) r)``."""
    doublings = math.ceil(math.log2(10 * theta + 1))
    return int(math.floor(C_d**doublings + 1e-9))
