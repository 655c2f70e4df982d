"""Quasi-uniform sampling in the g-metric, Voronoi complexes and hypothesis audits.

Sampling is variable-radius dart throwing: a candidate ``q`` is rejected if
some site ``p`` has ``e^{u((p+q)/2)} |p - q| < delta_qu h``.  After the
active list empties, a verification grid is scanned and every gap wider
than ``Delta_qu h`` gets a new site.

Randomness comes from ``numpy.random.Philox`` keyed by the seed.  Uniforms
are drawn in fixed-size blocks and consumed in order by a resumable kernel,
so the point set depends only on the seed and the spec.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numba as nb
import numpy as np
from scipy.spatial import Voronoi, cKDTree

from .complex import CellComplex, from_edges
from .errors import (
    BoundaryCellLeak,
    DegenerateSites,
    IterationBudgetExceeded,
    MissingMetadata,
    SpecInfeasible,
    WrongDimension,
)
from .oracle.eikonal import local_distance
from .oracle.fields import DensityField, DomainBox

BLOCK = 1 << 18
MIN_GAP_RATIO = 1.1


@dataclass(frozen=True)
class SampleSpec:
    field: DensityField
    box: DomainBox
    h: float
    seed: int = 0
    delta_qu: float = 1.0
    Delta_qu: float = 1.5
    candidates: int = 30
    max_fill_rounds: int = 100

    def __post_init__(self):
        if not self.h > 0:
            raise SpecInfeasible("h must be positive")
        if not 0 < self.delta_qu <= 1 <= self.Delta_qu:
            raise SpecInfeasible("need 0 < delta_qu <= 1 <= Delta_qu")
        if self.Delta_qu < MIN_GAP_RATIO * self.delta_qu:
            raise SpecInfeasible(
                f"Delta_qu/delta_qu = {self.Delta_qu / self.delta_qu:.3g} leaves no room "
                f"for gap filling (need >= {MIN_GAP_RATIO})")
        if self.field.dim != self.box.dim:
            raise WrongDimension("field and box dimensions differ")
        if self.box.dim not in (2, 3):
            raise WrongDimension("sampling supports m = 2 or 3")


# -- numba kernels ------------------------------------------------------------

@nb.njit(cache=True)
def _lookup(x, tlo, tstep, tshape, table, ndim):
    """Multilinear interpolation of the tabulated line density."""
    idx = np.zeros(3, np.int64)
    fr = np.zeros(3)
    for k in range(ndim):
        s = (x[k] - tlo[k]) / tstep
        i = int(math.floor(s))
        if i < 0:
            i = 0
        if i > tshape[k] - 2:
            i = tshape[k] - 2
        f = s - i
        if f < 0.0:
            f = 0.0
        if f > 1.0:
            f = 1.0
        idx[k] = i
        fr[k] = f
    acc = 0.0
    for corner in range(1 << ndim):
        w = 1.0
        flat = 0
        for k in range(ndim):
            b = (corner >> k) & 1
            w *= fr[k] if b else 1.0 - fr[k]
            flat = flat * tshape[k] + idx[k] + b
        acc += w * table[flat]
    return acc


@nb.njit(cache=True)
def _cell_of(x, lo, cs, gshape, ndim):
    flat = 0
    for k in range(ndim):
        c = int((x[k] - lo[k]) / cs)
        if c < 0:
            c = 0
        if c >= gshape[k]:
            c = gshape[k] - 1
        flat = flat * gshape[k] + c
    return flat


@nb.njit(cache=True)
def _conflict(q, pts, grid, lo, hi, cs, gshape, reach, sep, tlo, tstep, tshape, table, ndim):
    cq = np.zeros(3, np.int64)
    for k in range(ndim):
        c = int((q[k] - lo[k]) / cs)
        cq[k] = min(max(c, 0), gshape[k] - 1)
    span = 2 * reach + 1
    total = 1
    for k in range(ndim):
        total *= span
    mid = np.zeros(3)
    for t in range(total):
        rem = t
        flat = 0
        ok = True
        for k in range(ndim - 1, -1, -1):
            off = rem % span - reach
            rem //= span
            c = cq[k] + off
            if c < 0 or c >= gshape[k]:
                ok = False
                break
        if not ok:
            continue
        rem = t
        mult = 1
        for k in range(ndim - 1, -1, -1):
            off = rem % span - reach
            rem //= span
            flat += (cq[k] + off) * mult
            mult *= gshape[k]
        j = grid[flat]
        if j < 0:
            continue
        d2 = 0.0
        for k in range(ndim):
            dk = q[k] - pts[j, k]
            d2 += dk * dk
            mid[k] = 0.5 * (q[k] + pts[j, k])
        ell = _lookup(mid, tlo, tstep, tshape, table, ndim)
        if ell * math.sqrt(d2) < sep:
            return True
    return False


@nb.njit(cache=True)
def _throw(pts, npts, active, nactive, grid, lo, hi, cs, gshape, reach, sep,
           tlo, tstep, tshape, table, ndim, k_cand, buf, pos):
    """Advance dart throwing until done or the uniform buffer runs low."""
    need = 1 + k_cand * 3
    q = np.zeros(3)
    while nactive > 0:
        if pos + need > buf.size:
            return npts, nactive, pos, False
        a = int(buf[pos] * nactive)
        pos += 1
        if a >= nactive:
            a = nactive - 1
        i = active[a]
        ell = _lookup(pts[i], tlo, tstep, tshape, table, ndim)
        rp = sep / ell
        placed = False
        for _ in range(k_cand):
            u1 = buf[pos]
            u2 = buf[pos + 1]
            u3 = buf[pos + 2]
            pos += 3
            if ndim == 2:
                rad = rp * math.sqrt(1.0 + 3.0 * u1)
                th = 2.0 * math.pi * u2
                q[0] = pts[i, 0] + rad * math.cos(th)
                q[1] = pts[i, 1] + rad * math.sin(th)
            else:
                rad = rp * (1.0 + 7.0 * u1) ** (1.0 / 3.0)
                z = 2.0 * u2 - 1.0
                th = 2.0 * math.pi * u3
                s = math.sqrt(max(0.0, 1.0 - z * z))
                q[0] = pts[i, 0] + rad * s * math.cos(th)
                q[1] = pts[i, 1] + rad * s * math.sin(th)
                q[2] = pts[i, 2] + rad * z
            inside = True
            for k in range(ndim):
                if q[k] < lo[k] or q[k] >= hi[k]:
                    inside = False
            if not inside:
                continue
            if _conflict(q, pts, grid, lo, hi, cs, gshape, reach, sep, tlo, tstep,
                         tshape, table, ndim):
                continue
            for k in range(ndim):
                pts[npts, k] = q[k]
            grid[_cell_of(q, lo, cs, gshape, ndim)] = npts
            active[nactive] = npts
            nactive += 1
            npts += 1
            placed = True
            break
        if not placed:
            active[a] = active[nactive - 1]
            nactive -= 1
    return npts, nactive, pos, True


# -- sampling -----------------------------------------------------------------

class _Table:
    """Line density ``e^u`` tabulated on a fine grid for the kernels."""

    def __init__(self, fld: DensityField, box: DomainBox, step: float):
        n = np.maximum(np.ceil((box.hi - box.lo) / step).astype(int) + 1, 2)
        self.step = float(np.max((box.hi - box.lo) / (n - 1)))
        self.lo = box.lo.copy()
        self.shape = np.array(n, np.int64)
        axes = [self.lo[k] + self.step * np.arange(n[k]) for k in range(box.dim)]
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], 1)
        self.values = np.ascontiguousarray(fld.line_density(pts), dtype=float)

    def args(self):
        return self.lo, self.step, self.shape, self.values


def sample_quasi_uniform(spec: SampleSpec) -> np.ndarray:
    """Seed-deterministic quasi-uniform point set in the g-metric."""
    fld, box, h, m = spec.field, spec.box, spec.h, spec.box.dim
    sep = spec.delta_qu * h
    table = _Table(fld, box, h / 4)
    ell_min = float(table.values.min())
    ell_max = float(table.values.max())
    rmin = sep / ell_max
    cs = rmin / math.sqrt(m)
    gshape = np.ceil((box.hi - box.lo) / cs).astype(np.int64)
    if np.prod(gshape.astype(float)) > 5e8:
        raise SpecInfeasible("background grid too large; increase h")
    reach = int(math.ceil((sep / ell_min) / cs))
    cap = int(2.0 * box.volume() * (ell_max / sep) ** m * 2 + 64)
    pts = np.zeros((cap, m))
    active = np.zeros(cap, np.int64)
    grid = np.full(int(np.prod(gshape)), -1, np.int64)
    rng = np.random.Generator(np.random.Philox(int(spec.seed)))
    buf = rng.random(BLOCK)
    pts[0] = box.lo + buf[:m] * (box.hi - box.lo)
    grid[_cell_of(pts[0], box.lo, cs, gshape, m)] = 0
    npts, nactive, pos = 1, 1, m
    done = False
    while not done:
        npts, nactive, pos, done = _throw(
            pts, npts, active, nactive, grid, box.lo, box.hi, cs, gshape, reach, sep,
            *table.args(), m, spec.candidates, buf, pos)
        if not done:
            buf = np.concatenate([buf[pos:], rng.random(BLOCK)])
            pos = 0
        if npts >= cap - 1:
            raise IterationBudgetExceeded("point buffer exhausted")
    P = pts[:npts].copy()
    return _fill_gaps(P, fld, box, spec)


def _fill_gaps(P: np.ndarray, fld: DensityField, box: DomainBox, spec: SampleSpec) -> np.ndarray:
    h = spec.h
    cover = spec.Delta_qu * h
    ver = verification_grid(fld, box, h)
    ell = fld.line_density(ver)
    # grid nodes on the faces would coincide with their mirror images
    inset = 0.05 * h / float(ell.max())
    ver = np.clip(ver, box.lo + inset, box.hi - inset)
    for _ in range(spec.max_fill_rounds):
        d, _ = cKDTree(P).query(ver)
        gap = ell * d
        bad = np.flatnonzero(gap > cover)
        if bad.size == 0:
            return P
        order = bad[np.lexsort((bad, -gap[bad]))]
        # greedy suppression, largest gap first
        near = cKDTree(ver[order]).query_ball_point(ver[order], cover / ell[order])
        taken = np.zeros(len(order), bool)
        blocked = np.zeros(len(order), bool)
        for j in range(len(order)):
            if blocked[j]:
                continue
            taken[j] = True
            blocked[near[j]] = True
        P = np.vstack([P, ver[order[taken]]])
    raise IterationBudgetExceeded("gap filling did not converge")


def verification_grid(fld: DensityField, box: DomainBox, h: float, inner: bool = False) -> np.ndarray:
    """Grid of spacing about ``h/4`` in the g-metric used for covering checks."""
    b = box.inner() if inner else box
    step = 0.25 * h / float(np.max(fld.line_density(np.array([b.lo, b.hi, (b.lo + b.hi) / 2]))))
    n = np.maximum(np.ceil((b.hi - b.lo) / step).astype(int) + 1, 2)
    axes = [np.linspace(b.lo[k], b.hi[k], n[k]) for k in range(b.dim)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], 1)


# -- Voronoi complexes -----------------------------------------------------

def _simplex_volume(V: np.ndarray) -> np.ndarray:
    """Volumes of simplices given as ``(n, m+1, m)`` vertex arrays."""
    D = V[:, 1:] - V[:, :1]
    return np.abs(np.linalg.det(D)) / math.factorial(V.shape[2])


def _subdivide(V: np.ndarray) -> np.ndarray:
    """Midpoint subdivision: 4 triangles or 8 tetrahedra per simplex."""
    m = V.shape[2]
    if m == 2:
        a, b, c = V[:, 0], V[:, 1], V[:, 2]
        ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
        parts = [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
    else:
        a, b, c, d = V[:, 0], V[:, 1], V[:, 2], V[:, 3]
        ab, ac, ad = (a + b) / 2, (a + c) / 2, (a + d) / 2
        bc, bd, cd = (b + c) / 2, (b + d) / 2, (c + d) / 2
        parts = [(a, ab, ac, ad), (ab, b, bc, bd), (ac, bc, c, cd), (ad, bd, cd, d),
                 (ab, ac, ad, bd), (ab, ac, bc, bd), (ac, ad, bd, cd), (ac, bc, bd, cd)]
    return np.stack([np.stack(p, 1) for p in parts], 1).reshape(-1, m + 1, m)


def _cell_simplices(vor: Voronoi, n: int, m: int):
    """Pyramid decomposition of each original cell over its ridges.

    Returns the owner cell and the vertex array of every simplex
    (site apex plus a fan triangle of the ridge).
    """
    rp = vor.ridge_points
    rv = vor.ridge_vertices
    lens = np.fromiter((len(v) for v in rv), dtype=np.int64, count=len(rv))
    flat = np.fromiter((x for v in rv for x in v), dtype=np.int64, count=int(lens.sum()))
    starts = np.concatenate([[0], np.cumsum(lens)[:-1]])
    owners, simp = [], []
    for side in (0, 1):
        own = rp[:, side]
        sel = own < n
        for k in np.unique(lens[sel]):
            rows = np.flatnonzero(sel & (lens == k))
            if rows.size == 0:
                continue
            idx = flat[starts[rows][:, None] + np.arange(k)[None, :]]
            if np.any(idx < 0):
                bad = own[rows[np.any(idx < 0, 1)][0]]
                raise BoundaryCellLeak(f"cell {int(bad)} is unbounded")
            apex = vor.points[own[rows]]
            if m == 2:
                S = np.stack([apex, vor.vertices[idx[:, 0]], vor.vertices[idx[:, 1]]], 1)
                owners.append(own[rows])
                simp.append(S)
            else:
                for j in range(1, k - 1):
                    S = np.stack([apex, vor.vertices[idx[:, 0]], vor.vertices[idx[:, j]],
                                  vor.vertices[idx[:, j + 1]]], 1)
                    owners.append(own[rows])
                    simp.append(S)
    return np.concatenate(owners), np.concatenate(simp)


def _ridge_measure(vor: Voronoi, m: int) -> np.ndarray:
    """Length (2D) or fan-triangulated area (3D) of every ridge; ``inf`` if unbounded."""
    rv = vor.ridge_vertices
    lens = np.fromiter((len(v) for v in rv), dtype=np.int64, count=len(rv))
    flat = np.fromiter((x for v in rv for x in v), dtype=np.int64, count=int(lens.sum()))
    starts = np.concatenate([[0], np.cumsum(lens)[:-1]]).astype(np.int64)
    out = np.zeros(len(rv))
    for k in np.unique(lens):
        rows = np.flatnonzero(lens == k)
        idx = flat[starts[rows][:, None] + np.arange(k)[None, :]]
        open_ = np.any(idx < 0, 1)
        V = vor.vertices[np.where(idx >= 0, idx, 0)]
        if m == 2:
            a = np.linalg.norm(V[:, 1] - V[:, 0], axis=1)
        else:
            a = np.zeros(len(rows))
            for j in range(1, k - 1):
                c = np.cross(V[:, j] - V[:, 0], V[:, j + 1] - V[:, 0])
                a += 0.5 * np.linalg.norm(c, axis=1)
        out[rows] = np.where(open_, np.inf, a)
    return out


def _mirror(points: np.ndarray, box: DomainBox, width: float):
    ext, src = [points], [np.arange(len(points))]
    for k in range(box.dim):
        for bound, sgn in ((box.lo[k], -1), (box.hi[k], 1)):
            near = np.flatnonzero(np.abs(points[:, k] - bound) < width)
            Q = points[near].copy()
            Q[:, k] = 2 * bound - Q[:, k]
            ext.append(Q)
            src.append(near)
    return np.vstack(ext), np.concatenate(src)


def voronoi_complex(points, field: DensityField, box: DomainBox,
                    refine_tol: float = 0.01, h: Optional[float] = None) -> CellComplex:
    """Voronoi complex of ``points`` clipped to ``box``.

    Cells are Euclidean Voronoi regions; weights are their g-volumes
    ``int e^{m u}`` by the centroid rule on a pyramid decomposition, refined
    once by midpoint subdivision where ``e^{m u}`` varies by more than
    ``refine_tol`` across a cell.  Positions are the sites.
    """
    P = np.asarray(points, dtype=float)
    n, m = P.shape
    if m not in (2, 3) or field.dim != m or box.dim != m:
        raise WrongDimension("Voronoi complexes need matching m = 2 or 3")
    if not np.all(box.contains(P)):
        raise ValueError("all sites must lie inside the box")
    tree = cKDTree(P)
    dmin, _ = tree.query(P, k=2)
    if np.any(dmin[:, 1] <= 1e-12 * box.diameter):
        i = int(np.argmin(dmin[:, 1]))
        raise DegenerateSites(f"site {i} coincides with another site")
    spacing = float(np.max(dmin[:, 1]))
    if h is None:
        h = float(np.median(dmin[:, 1]) * np.median(field.line_density(P)))
    X, _ = _mirror(P, box, 4 * spacing)
    vor = Voronoi(X)

    # adjacency from ridges of positive measure between original sites
    meas = _ridge_measure(vor, m)
    rp = vor.ridge_points
    tol = 1e-9 * spacing ** (m - 1)
    keep = (rp[:, 0] < n) & (rp[:, 1] < n) & (meas > tol)
    a, b = rp[keep, 0], rp[keep, 1]
    src = np.concatenate([a, b])
    dst = np.concatenate([b, a])

    owners, S = _cell_simplices(vor, n, m)
    dens = lambda x: np.exp(m * field.u(x))  # noqa: E731
    vert_d = dens(S.reshape(-1, m)).reshape(S.shape[:2])
    vol = _simplex_volume(S)
    w = np.bincount(owners, weights=vol * dens(S.mean(1)), minlength=n)
    dmax = np.zeros(n)
    dmin_c = np.full(n, np.inf)
    np.maximum.at(dmax, owners, vert_d.max(1))
    np.minimum.at(dmin_c, owners, vert_d.min(1))
    rough = dmax > (1 + refine_tol) * dmin_c
    if rough.any():
        sel = rough[owners]
        F = _subdivide(S[sel])
        fo = np.repeat(owners[sel], 4 if m == 2 else 8)
        w_f = np.bincount(fo, weights=_simplex_volume(F) * dens(F.mean(1)), minlength=n)
        w = np.where(rough, w_f, w)

    # g0 diameters from region vertices
    diam = _region_diameters(vor, n)
    K = box.inner()
    inK = K.contains(P)
    regions = [vor.regions[vor.point_region[i]] for i in np.flatnonzero(inK)]
    if regions:
        V = vor.vertices
        vface = np.any((np.abs(V - box.lo) < 1e-9 * spacing) | (np.abs(V - box.hi) < 1e-9 * spacing), 1)
        lens = np.fromiter((len(r) for r in regions), dtype=np.int64, count=len(regions))
        flat = np.fromiter((x for r in regions for x in r), dtype=np.int64, count=int(lens.sum()))
        hit = np.add.reduceat(vface[flat].astype(np.int64), np.concatenate([[0], np.cumsum(lens)[:-1]]))
        if hit.any():
            i = int(np.flatnonzero(inK)[np.argmax(hit > 0)])
            raise BoundaryCellLeak(f"cell {i} with site in K touches the box boundary")
    cx = from_edges(n, src, dst, weights=w, positions=P, mesh_scale=h, strict=True)
    cx.extras.update(cell_diameter=diam, in_k=inK, box=box)
    return cx


def _region_diameters(vor: Voronoi, n: int, chunk: int = 4096) -> np.ndarray:
    regs = [vor.regions[vor.point_region[i]] for i in range(n)]
    kmax = max(len(r) for r in regs)
    out = np.zeros(n)
    for s in range(0, n, chunk):
        block = regs[s:s + chunk]
        idx = np.full((len(block), kmax), -1, np.int64)
        for j, r in enumerate(block):
            idx[j, :len(r)] = r
        V = vor.vertices[np.where(idx >= 0, idx, 0)]
        V = np.where((idx >= 0)[..., None], V, np.nan)
        D = np.sqrt(((V[:, :, None, :] - V[:, None, :, :]) ** 2).sum(-1))
        out[s:s + len(block)] = np.nanmax(D.reshape(len(block), -1), axis=1)
    return out


def sample_voronoi(spec: SampleSpec) -> CellComplex:
    """Sample a point set and build its Voronoi complex in one step."""
    P = sample_quasi_uniform(spec)
    return voronoi_complex(P, spec.field, spec.box, h=spec.h)


# -- hypothesis audit -------------------------------------------------------

@dataclass(frozen=True)
class HypothesisReport:
    """Empirical constants of H1..H5 on the cells of a compact set K.

    ``ball_inclusion_constants`` are measured against the fitted yardstick
    ``yardstick_ratio``: one count step corresponds to ``lambda h`` of
    g-distance on a Voronoi complex, and ``c1, c2`` bound the deviation
    ``B_g(lambda h r - c1 h) <= Phi(B(r)) <= B_g(lambda h r + c2 h)``.
    """

    max_degree: int
    diam_ratio_range: tuple
    realization_density: float
    ball_inclusion_constants: tuple
    weight_ratio_range: tuple
    yardstick_ratio: float = 1.0
    weight_lambda: float = 1.0
    separation_ratio: float = 0.0
    cells_audited: int = 0
    radii: tuple = ()

    def to_json(self) -> dict:
        return {
            "max_degree": self.max_degree,
            "diam_ratio_range": list(self.diam_ratio_range),
            "realization_density": self.realization_density,
            "ball_inclusion_constants": list(self.ball_inclusion_constants),
            "weight_ratio_range": list(self.weight_ratio_range),
            "yardstick_ratio": self.yardstick_ratio,
            "weight_lambda": self.weight_lambda,
            "separation_ratio": self.separation_ratio,
            "cells_audited": self.cells_audited,
            "radii": list(self.radii),
        }


def audit_hypotheses(complex: CellComplex, field: DensityField, K: DomainBox,
                     radii=(2, 4, 6, 8), n_centers: int = 12, seed: int = 0,
                     grid_factor: float = 0.2) -> HypothesisReport:
    """Measure the H1..H5 constants on cells whose realization lies in ``K``."""
    if complex.positions is None or complex.weights is None or complex.mesh_scale is None:
        raise MissingMetadata("audit needs positions, weights and mesh_scale")
    h = complex.mesh_scale
    X = complex.positions
    m = X.shape[1]
    inK = K.contains(X)
    ids = np.flatnonzero(inK)
    if ids.size == 0:
        raise ValueError("no cell realizations inside K")

    # H1
    max_degree = int(complex.degrees.max())

    # H2: g0 diameters in g units relative to h
    ell = field.line_density(X[ids])
    if "cell_diameter" in complex.extras:
        diam = complex.extras["cell_diameter"][ids]
    else:
        diam = _neighbour_diameter(complex, ids)
    dr = ell * diam / h
    diam_range = (float(dr.min()), float(dr.max()))

    # H3: covering radius of the realization inside K, and separation
    tree = cKDTree(X)
    ver = verification_grid(field, K, h)
    dcov, _ = tree.query(ver)
    covering = float((field.line_density(ver) * dcov).max() / h)
    dsep, _ = tree.query(X[ids], k=2)
    separation = float((ell * dsep[:, 1]).min() / h)

    # H5
    wr = complex.weights[ids] / (h**m * np.exp(m * field.u(X[ids])))
    w_range = (float(wr.min()), float(wr.max()))
    lam_w = float(max(wr.max(), 1.0 / wr.min()))

    # H4: count balls against g-balls around deep centres
    rmax = max(radii)
    reach = 2.0 * rmax * h + 4 * h
    pad = reach / float(field.line_density(X[ids]).min())
    depth = K.distance_to_boundary(X[ids])
    cand = ids[depth > pad]
    if cand.size < n_centers:
        cand = ids[np.argsort(-K.distance_to_boundary(X[ids]), kind="stable")[:n_centers]]
    rng = np.random.Generator(np.random.Philox(int(seed)))
    centers = np.sort(rng.choice(cand, size=min(n_centers, cand.size), replace=False))
    rows = []
    for c in centers:
        dist = complex.bfs(int(c), rmax + 1)
        ell_c = float(field.line_density(X[c][None])[0])
        gf = local_distance(field, X[c], reach, grid_factor * h / ell_c)
        near = _sites_near(tree, X[c], 1.5 * reach / ell_c)
        dg = gf.interpolate(X[near])
        for r in radii:
            member = (dist[near] >= 0) & (dist[near] <= r)
            if not member.any() or np.any(~np.isfinite(dg[member])):
                continue
            r_out = float(dg[member].max() / h)
            outside = dg[~member]
            r_in = float(outside.min() / h) if outside.size else np.inf
            rows.append((r, r_in, r_out))
    R = np.array([row[0] for row in rows], float)
    rin = np.array([row[1] for row in rows])
    rout = np.array([row[2] for row in rows])
    finite = np.isfinite(rin)
    lam = float(np.sum((rin[finite] + rout[finite]) / 2 * R[finite]) / np.sum(R[finite] ** 2)) if finite.any() else 1.0
    c1 = float(np.max(lam * R[finite] - rin[finite])) if finite.any() else 0.0
    c2 = float(np.max(rout - lam * R)) if len(R) else 0.0
    return HypothesisReport(max_degree, diam_range, covering, (c1, c2), w_range,
                            lam, lam_w, separation, int(ids.size), tuple(int(r) for r in radii))


def _sites_near(tree: cKDTree, x, radius: float) -> np.ndarray:
    return np.array(sorted(tree.query_ball_point(x, radius)), dtype=np.int64)


def _neighbour_diameter(cx: CellComplex, ids: np.ndarray) -> np.ndarray:
    """Fallback cell size: largest distance from a site to its neighbour sites."""
    X = cx.positions
    out = np.zeros(len(ids))
    for j, c in enumerate(ids):
        nb = cx.neighbors(int(c))
        out[j] = np.sqrt(((X[nb] - X[c]) ** 2).sum(1)).max() if nb.size else 0.0
    return out
