"""Locally finite cell complexes and the integer count metric.

A :class:`CellComplex` stores face adjacency in compressed form (``indptr`` /
``indices``, like a CSR matrix) so that breadth-first search stays cache
friendly on large complexes.  Cells are dense integer ids ``0..N-1``.

Distances are counts of face crossings.  Every ball / sphere query is a
single BFS from the centre; layer ``k`` of that BFS is the sphere ``S(k)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    AsymmetricAdjacency,
    DegreeBoundExceeded,
    InvalidCell,
    InvalidComplex,
    NonPositiveWeight,
    SelfLoop,
    Unreachable,
    WeightsMissing,
)

DEFAULT_DEGREE_BOUND = 64


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CellComplex:
    """Immutable adjacency structure with optional weights and positions.

    Attributes
    ----------
    indptr, indices : ndarray
        Neighbours of cell ``c`` are ``indices[indptr[c]:indptr[c+1]]``,
        sorted ascending.
    weights : ndarray or None
        Per-cell volumetric measure, strictly positive.
    positions : ndarray or None
        ``(N, m)`` realization points of the cells.
    mesh_scale : float or None
        The mesh scale ``a`` the complex was built at.
    degree_bound : int
        Declared upper bound on the degree of every cell.
    extras : dict
        Derived per-cell geometry kept by generators (for example Voronoi
        cell diameters).  Not serialized.
    """

    indptr: np.ndarray
    indices: np.ndarray
    weights: Optional[np.ndarray] = None
    positions: Optional[np.ndarray] = None
    mesh_scale: Optional[float] = None
    degree_bound: int = DEFAULT_DEGREE_BOUND
    extras: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def cell_count(self) -> int:
        return len(self.indptr) - 1

    def __len__(self) -> int:
        return self.cell_count

    @property
    def dim(self) -> int:
        return 0 if self.positions is None else self.positions.shape[1]

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, c: int) -> np.ndarray:
        self._check_cell(c)
        return self.indices[self.indptr[c]:self.indptr[c + 1]]

    def adjacency_lists(self) -> list[list[int]]:
        return [self.indices[self.indptr[c]:self.indptr[c + 1]].tolist()
                for c in range(self.cell_count)]

    def _check_cell(self, c) -> int:
        if not (0 <= int(c) < self.cell_count) or int(c) != c:
            raise InvalidCell(f"cell id {c!r} out of range [0, {self.cell_count})")
        return int(c)

    # -- BFS -------------------------------------------------------------

    def bfs(self, source: int, r_max: Optional[int] = None,
            target: Optional[int] = None, parents: bool = False):
        """Run a BFS from ``source``.

        Returns the distance array (``-1`` for cells not reached within
        ``r_max``) and, when ``parents`` is set, the BFS parent array.
        The search stops early once ``target`` is labelled.
        """
        source = self._check_cell(source)
        n = self.cell_count
        dist = np.full(n, -1, dtype=np.int32)
        par = np.full(n, -1, dtype=np.int64) if parents else None
        dist[source] = 0
        frontier = np.array([source], dtype=np.int64)
        d = 0
        indptr, indices = self.indptr, self.indices
        while frontier.size and (r_max is None or d < r_max):
            if target is not None and dist[target] >= 0:
                break
            starts = indptr[frontier]
            counts = indptr[frontier + 1] - starts
            total = int(counts.sum())
            if total == 0:
                break
            offs = np.repeat(starts - (np.cumsum(counts) - counts), counts)
            nbrs = indices[offs + np.arange(total)]
            fresh = dist[nbrs] < 0
            if parents:
                owners = np.repeat(frontier, counts)[fresh]
                nbrs = nbrs[fresh]
                nbrs, first = np.unique(nbrs, return_index=True)
                par[nbrs] = owners[first]
            else:
                nbrs = np.unique(nbrs[fresh])
            d += 1
            dist[nbrs] = d
            frontier = nbrs.astype(np.int64, copy=False)
        return (dist, par) if parents else dist

    def layers(self, center: int, r_max: int) -> list[np.ndarray]:
        """BFS layers ``S(0), ..., S(r_max)`` as sorted id arrays."""
        dist = self.bfs(center, r_max)
        order = np.argsort(dist, kind="stable")
        order = order[dist[order] >= 0]
        ds = dist[order]
        bounds = np.searchsorted(ds, np.arange(r_max + 2))
        return [order[bounds[k]:bounds[k + 1]] for k in range(r_max + 1)]


@dataclass(frozen=True)
class BallReport:
    """Sphere and ball counts of one BFS."""

    center: int
    radius: int
    sphere_counts: tuple
    ball_count: int
    members: Optional[tuple] = None


# -- construction ---------------------------------------------------------

def build_complex(adjacency_lists: Sequence[Sequence[int]],
                  weights=None, positions=None, mesh_scale: Optional[float] = None,
                  strict: bool = True,
                  degree_bound: int = DEFAULT_DEGREE_BOUND) -> CellComplex:
    """Validate adjacency lists and build a :class:`CellComplex`.

    In strict mode an edge without its reverse raises
    :class:`AsymmetricAdjacency`; otherwise missing reverses are added.
    Duplicate neighbour entries are collapsed.
    """
    n = len(adjacency_lists)
    lens = np.fromiter((len(a) for a in adjacency_lists), dtype=np.int64, count=n)
    src = np.repeat(np.arange(n, dtype=np.int64), lens)
    if lens.sum():
        dst = np.concatenate([np.asarray(a, dtype=np.int64) for a in adjacency_lists if len(a)])
    else:
        dst = np.zeros(0, dtype=np.int64)
    return from_edges(n, src, dst, weights=weights, positions=positions,
                      mesh_scale=mesh_scale, strict=strict, degree_bound=degree_bound)


def from_edges(n: int, src, dst, weights=None, positions=None,
               mesh_scale: Optional[float] = None, strict: bool = True,
               degree_bound: int = DEFAULT_DEGREE_BOUND) -> CellComplex:
    """Build a complex from directed edge arrays ``src -> dst``."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if src.size and (dst.min() < 0 or dst.max() >= n or src.min() < 0 or src.max() >= n):
        raise InvalidComplex("adjacency references a cell id outside [0, N)")
    loops = src == dst
    if loops.any():
        c = int(src[loops][0])
        raise SelfLoop(f"cell {c} lists itself as a neighbour")
    keys = np.unique(src * n + dst)
    rev = np.unique((keys % n) * n + keys // n)
    if keys.size != rev.size or not np.array_equal(keys, rev):
        if strict:
            missing = np.setdiff1d(keys, rev, assume_unique=True)
            if missing.size == 0:
                missing = np.setdiff1d(rev, keys, assume_unique=True)
            k = int(missing[0])
            a, b = k // n, k % n
            raise AsymmetricAdjacency(f"edge {b}->{a} present without {a}->{b}")
        keys = np.union1d(keys, rev)
    s = keys // n
    d = keys % n
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(s, minlength=n), out=indptr[1:])
    idx_dtype = np.int32 if n < 2**31 else np.int64
    return _finish(indptr, d.astype(idx_dtype), weights, positions, mesh_scale, degree_bound)


def from_csr(indptr, indices, weights=None, positions=None,
             mesh_scale: Optional[float] = None,
             degree_bound: int = DEFAULT_DEGREE_BOUND,
             validate: bool = True) -> CellComplex:
    """Wrap CSR arrays that are already sorted and symmetric.

    ``validate`` re-checks symmetry and self-loops; generators that build
    adjacency by construction may skip it.
    """
    indptr = np.asarray(indptr, dtype=np.int64)
    indices = np.asarray(indices)
    if validate:
        n = len(indptr) - 1
        src = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
        return from_edges(n, src, indices, weights, positions, mesh_scale,
                          strict=True, degree_bound=degree_bound)
    return _finish(indptr, indices, weights, positions, mesh_scale, degree_bound)


def _finish(indptr, indices, weights, positions, mesh_scale, degree_bound) -> CellComplex:
    n = len(indptr) - 1
    deg = np.diff(indptr)
    if n and deg.max() > degree_bound:
        c = int(np.argmax(deg))
        raise DegreeBoundExceeded(f"cell {c} has degree {int(deg[c])} > bound {degree_bound}")
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (n,):
            raise InvalidComplex(f"weights must have shape ({n},)")
        if not np.all(weights > 0):
            c = int(np.flatnonzero(~(weights > 0))[0])
            raise NonPositiveWeight(f"cell {c} has weight {weights[c]!r}")
        weights = _frozen(weights)
    if positions is not None:
        positions = np.asarray(positions, dtype=np.float64)
        if positions.ndim == 1:
            positions = positions[:, None]
        if positions.shape[0] != n:
            raise InvalidComplex(f"positions must have {n} rows")
        positions = _frozen(positions)
    if mesh_scale is not None:
        mesh_scale = float(mesh_scale)
        if not mesh_scale > 0:
            raise InvalidComplex("mesh_scale must be positive")
    return CellComplex(_frozen(indptr), _frozen(indices), weights, positions,
                       mesh_scale, int(degree_bound))


# -- queries ------------------------------------------------------------------

def count_distance(complex: CellComplex, u: int, v: int) -> int:
    """Exact count distance ``d_h(u, v)``; raises :class:`Unreachable`."""
    v = complex._check_cell(v)
    dist = complex.bfs(u, target=v)
    if dist[v] < 0:
        raise Unreachable(u, v)
    return int(dist[v])


def geodesic_path(complex: CellComplex, u: int, v: int) -> list[int]:
    """A minimizing cell path from ``u`` to ``v`` extracted from BFS parents."""
    v = complex._check_cell(v)
    dist, par = complex.bfs(u, target=v, parents=True)
    if dist[v] < 0:
        raise Unreachable(u, v)
    path = [v]
    while path[-1] != u:
        path.append(int(par[path[-1]]))
    return path[::-1]


def ball_report(complex: CellComplex, center: int, r_max: int,
                keep_members: bool = False) -> BallReport:
    """Layer counts ``|S(0)|..|S(r_max)|`` of the intrinsic ball."""
    if r_max < 0:
        raise ValueError("r_max must be non-negative")
    dist = complex.bfs(center, r_max)
    reached = dist[dist >= 0]
    spheres = np.bincount(reached, minlength=r_max + 1)[:r_max + 1]
    members = None
    if keep_members:
        ids = np.flatnonzero(dist >= 0)
        order = np.lexsort((ids, dist[ids]))
        members = tuple((int(ids[i]), int(dist[ids[i]])) for i in order)
    return BallReport(int(center), int(r_max), tuple(int(x) for x in spheres),
                      int(spheres.sum()), members)


def weighted_ball_mass(complex: CellComplex, center: int, r: int) -> float:
    """Sum of cell weights over ``B(center, r)``."""
    if complex.weights is None:
        raise WeightsMissing("complex has no per-cell weights")
    dist = complex.bfs(center, r)
    return float(complex.weights[dist >= 0].sum())


def layer_masses(complex: CellComplex, center: int, r_max: int,
                 use_weights: bool = True) -> np.ndarray:
    """Per-layer mass ``nu(S(k))`` for ``k = 0..r_max`` (counts if unweighted)."""
    dist = complex.bfs(center, r_max)
    hit = dist >= 0
    w = None
    if use_weights:
        if complex.weights is None:
            raise WeightsMissing("complex has no per-cell weights")
        w = complex.weights[hit]
    return np.bincount(dist[hit], weights=w, minlength=r_max + 1)[:r_max + 1].astype(float)
