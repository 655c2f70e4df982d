"""Geodesic distances, ball volumes and circle perimeters of ``g = e^{2u} g0``.

Distances solve the eikonal equation ``|grad T| = e^u`` on a regular grid by
fast marching.  The solver is factored: ``T = T0 * tau`` with
``T0 = e^{u(s)} |x - s|`` the exact solution for the frozen source slowness,
so the source singularity is carried by ``T0`` and the upwind stencils
(second order where two accepted upwind nodes exist) only see the smooth
factor ``tau``.  Nodes within a few grid steps of the source are seeded
by Gauss-Legendre quadrature of ``e^u`` along the straight segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numba as nb
import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..errors import BallEscapesDomain, GridTooCoarse, WrongDimension
from .fields import DensityField, DomainBox

MAX_STEP_RATIO = 1.25
FAR, TRIAL, ACCEPTED = 0, 1, 2


@nb.njit(cache=True)
def _node_coord(i, k, shape, strides):
    return (i // strides[k]) % shape[k]


@nb.njit(cache=True)
def _solve_node(i, shape, strides, ndim, delta, slow, T, T0, G0, status, order):
    n_i = slow[i]
    t0 = T0[i]
    A = np.zeros(3)
    B = np.zeros(3)
    A1 = np.zeros(3)
    B1 = np.zeros(3)
    Tj = np.zeros(3)
    act = np.zeros(3, np.bool_)
    for k in range(ndim):
        A[k] = G0[i, k]
        A1[k] = G0[i, k]
        ck = _node_coord(i, k, shape, strides)
        best = -1
        sgn = 0
        bestT = np.inf
        for s in (-1, 1):
            c = ck + s
            if c < 0 or c >= shape[k]:
                continue
            j = i + s * strides[k]
            if status[j] == ACCEPTED and T[j] < bestT:
                bestT = T[j]
                best = j
                sgn = s
        if best < 0:
            continue
        act[k] = True
        Tj[k] = bestT
        hk = -sgn * delta
        tj = T[best] / T0[best] if T0[best] > 0 else 1.0
        A1[k] = G0[i, k] + t0 / hk
        B1[k] = -t0 * tj / hk
        A[k] = A1[k]
        B[k] = B1[k]
        if order == 2:
            c2 = ck + 2 * sgn
            if c2 >= 0 and c2 < shape[k]:
                j2 = best + sgn * strides[k]
                if status[j2] == ACCEPTED and T[j2] <= T[best]:
                    tj2 = T[j2] / T0[j2] if T0[j2] > 0 else 1.0
                    A[k] = G0[i, k] + t0 * 1.5 / hk
                    B[k] = t0 * (-4.0 * tj + tj2) / (2.0 * hk)
    nact = 0
    for k in range(ndim):
        if act[k]:
            nact += 1
    bestval = np.inf
    # prefer the largest stencil that gives a causal root
    for size in range(nact, 0, -1):
        for mask in range(1, 1 << ndim):
            cnt = 0
            ok = True
            for k in range(ndim):
                if (mask >> k) & 1:
                    cnt += 1
                    if not act[k]:
                        ok = False
            if not ok or cnt != size:
                continue
            for pass_ in range(2):
                a = 0.0
                b = 0.0
                c = -n_i * n_i
                for k in range(ndim):
                    if (mask >> k) & 1:
                        Ak = A[k] if pass_ == 0 else A1[k]
                        Bk = B[k] if pass_ == 0 else B1[k]
                    else:
                        Ak = G0[i, k]
                        Bk = 0.0
                    a += Ak * Ak
                    b += 2.0 * Ak * Bk
                    c += Bk * Bk
                disc = b * b - 4.0 * a * c
                if disc < 0.0 or a == 0.0:
                    continue
                Tc = t0 * (-b + math.sqrt(disc)) / (2.0 * a)
                valid = True
                for k in range(ndim):
                    if (mask >> k) & 1 and Tc < Tj[k]:
                        valid = False
                if valid:
                    if Tc < bestval:
                        bestval = Tc
                    break
        if bestval < np.inf:
            break
    if bestval == np.inf:
        for k in range(ndim):
            if act[k]:
                v = Tj[k] + n_i * delta
                if v < bestval:
                    bestval = v
    return bestval


@nb.njit(cache=True)
def _sift_up(hv, hi, k):
    while k > 0:
        p = (k - 1) >> 1
        if hv[p] <= hv[k]:
            break
        hv[p], hv[k] = hv[k], hv[p]
        hi[p], hi[k] = hi[k], hi[p]
        k = p


@nb.njit(cache=True)
def _sift_down(hv, hi, n):
    k = 0
    while True:
        c = 2 * k + 1
        if c >= n:
            break
        if c + 1 < n and hv[c + 1] < hv[c]:
            c += 1
        if hv[k] <= hv[c]:
            break
        hv[c], hv[k] = hv[k], hv[c]
        hi[c], hi[k] = hi[k], hi[c]
        k = c


@nb.njit(cache=True)
def _march(shape, strides, ndim, delta, slow, T, T0, G0, status, order, t_stop):
    N = T.size
    cap = 2 * N + 16
    hv = np.empty(cap)
    hi = np.empty(cap, np.int64)
    n = 0
    # seed the heap with neighbours of the accepted set
    for i in range(N):
        if status[i] != ACCEPTED:
            continue
        for k in range(ndim):
            ck = _node_coord(i, k, shape, strides)
            for s in (-1, 1):
                c = ck + s
                if c < 0 or c >= shape[k]:
                    continue
                j = i + s * strides[k]
                if status[j] == ACCEPTED:
                    continue
                v = _solve_node(j, shape, strides, ndim, delta, slow, T, T0, G0, status, order)
                if v != T[j]:
                    T[j] = v
                    status[j] = TRIAL
                    if n == cap:
                        cap *= 2
                        hv2 = np.empty(cap)
                        hi2 = np.empty(cap, np.int64)
                        hv2[:n] = hv[:n]
                        hi2[:n] = hi[:n]
                        hv = hv2
                        hi = hi2
                    hv[n] = v
                    hi[n] = j
                    _sift_up(hv, hi, n)
                    n += 1
    while n > 0:
        v = hv[0]
        i = hi[0]
        n -= 1
        hv[0] = hv[n]
        hi[0] = hi[n]
        _sift_down(hv, hi, n)
        if status[i] == ACCEPTED or v != T[i]:
            continue  # stale entry
        if v > t_stop:
            break
        status[i] = ACCEPTED
        for k in range(ndim):
            ck = _node_coord(i, k, shape, strides)
            for s in (-1, 1):
                c = ck + s
                if c < 0 or c >= shape[k]:
                    continue
                j = i + s * strides[k]
                if status[j] == ACCEPTED:
                    continue
                v2 = _solve_node(j, shape, strides, ndim, delta, slow, T, T0, G0, status, order)
                if v2 != T[j]:
                    T[j] = v2
                    status[j] = TRIAL
                    if n == cap:
                        cap *= 2
                        hv2 = np.empty(cap)
                        hi2 = np.empty(cap, np.int64)
                        hv2[:n] = hv[:n]
                        hi2[:n] = hi[:n]
                        hv = hv2
                        hi = hi2
                    hv[n] = v2
                    hi[n] = j
                    _sift_up(hv, hi, n)
                    n += 1
    # anything not accepted is beyond t_stop
    for i in range(N):
        if status[i] != ACCEPTED:
            T[i] = np.inf


@dataclass(frozen=True, eq=False)
class GridField:
    """Regular grid carrying ``e^u`` and, after a solve, the distance ``T``.

    Node ``(i_1, .., i_m)`` sits at ``lower + delta * i``.  ``distance`` is
    ``inf`` at nodes the march did not reach (beyond its stop value).
    """

    lower: np.ndarray
    delta: float
    shape: tuple
    line_density: np.ndarray
    distance: Optional[np.ndarray] = None
    source: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return len(self.shape)

    def axes(self) -> list:
        return [self.lower[k] + self.delta * np.arange(self.shape[k]) for k in range(self.dim)]

    def nodes(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def interpolate(self, points, fill: float = np.inf) -> np.ndarray:
        """Multilinear interpolation of ``distance``; ``fill`` outside or unreached."""
        T = np.where(np.isfinite(self.distance), self.distance, np.nan)
        it = RegularGridInterpolator(self.axes(), T, bounds_error=False, fill_value=np.nan)
        out = it(np.asarray(points, dtype=float))
        return np.where(np.isnan(out), fill, out)


def _make_grid(field: DensityField, lower, shape, delta) -> GridField:
    lower = np.asarray(lower, dtype=float)
    g = GridField(lower, float(delta), tuple(int(s) for s in shape), np.empty(0))
    ell = field.line_density(g.nodes()).reshape(g.shape)
    return GridField(lower, float(delta), g.shape, ell)


def _check_resolution(grid: GridField, max_ratio: float) -> None:
    logl = np.log(grid.line_density)
    for k in range(grid.dim):
        if grid.shape[k] > 1:
            jump = np.abs(np.diff(logl, axis=k)).max()
            if jump > math.log(max_ratio):
                raise GridTooCoarse(
                    f"e^u changes by a factor {math.exp(jump):.3g} over one grid step "
                    f"(limit {max_ratio})")


def _march_grid(field: DensityField, grid: GridField, source, order: int,
                t_stop: float, init_radius: int) -> GridField:
    m = grid.dim
    src = np.asarray(source, dtype=float)
    X = grid.nodes()
    d = X - src
    dist = np.sqrt((d * d).sum(1))
    n_src = float(field.line_density(src[None])[0])
    T0 = n_src * dist
    G0 = np.zeros((len(X), 3))
    nz = dist > 0
    G0[nz, :m] = n_src * d[nz] / dist[nz, None]
    T = np.full(len(X), np.inf)
    status = np.zeros(len(X), np.int8)
    init = dist <= init_radius * grid.delta * (1 + 1e-9)
    if not init.any():
        raise GridTooCoarse("no grid node near the source")
    gx, gw = np.polynomial.legendre.leggauss(8)
    s = 0.5 * (gx + 1)
    P = src[None, None, :] + s[None, :, None] * d[init][:, None, :]
    vals = field.line_density(P.reshape(-1, m)).reshape(P.shape[:2])
    T[init] = dist[init] * (vals @ (0.5 * gw))
    status[init] = ACCEPTED
    shape = np.array(grid.shape, np.int64)
    strides = np.array([int(np.prod(shape[k + 1:])) for k in range(m)], np.int64)
    _march(shape, strides, m, grid.delta, grid.line_density.ravel().copy(), T, T0, G0,
           status, order, float(t_stop))
    return GridField(grid.lower, grid.delta, grid.shape, grid.line_density,
                     T.reshape(grid.shape), src)


def geodesic_distance(field: DensityField, source, box: DomainBox, delta: float,
                      order: int = 2, t_stop: float = np.inf, init_radius: int = 3,
                      max_ratio: float = MAX_STEP_RATIO) -> GridField:
    """Solve ``|grad T| = e^u`` on a grid of spacing ``delta`` covering ``box``.

    ``order`` selects first- or second-order upwind stencils; marching stops
    once ``T`` exceeds ``t_stop``.
    """
    if field.dim != box.dim or len(source) != box.dim:
        raise WrongDimension("field, box and source dimensions differ")
    if not box.contains(source):
        raise ValueError("source lies outside the box")
    if field.dim > 3:
        raise WrongDimension("the grid solver supports m <= 3")
    shape = np.maximum(np.round((box.hi - box.lo) / delta).astype(int) + 1, 2)
    grid = _make_grid(field, box.lo, shape, delta)
    _check_resolution(grid, max_ratio)
    return _march_grid(field, grid, source, order, t_stop, init_radius)


def local_distance(field: DensityField, center, r: float, delta: float,
                   box: Optional[DomainBox] = None, order: int = 2,
                   max_ratio: float = MAX_STEP_RATIO) -> GridField:
    """Distance field covering ``B_g(center, r)`` with one cell of slack.

    Without ``box`` a grid centred on ``center`` is grown until the ball fits;
    with ``box`` the ball must fit inside it or :class:`BallEscapesDomain` is
    raised.
    """
    c = np.asarray(center, dtype=float)
    stop = r + 4 * delta * float(field.line_density(c[None])[0]) * 2
    if box is not None:
        gf = geodesic_distance(field, c, box, delta, order, stop, max_ratio=max_ratio)
        if _touches_boundary(gf, r):
            raise BallEscapesDomain(f"B_g(center, {r}) reaches the box boundary")
        return gf
    half = 1.3 * r / float(field.line_density(c[None])[0]) + 4 * delta
    for _ in range(8):
        k = int(math.ceil(half / delta))
        grid = _make_grid(field, c - k * delta, (2 * k + 1,) * len(c), delta)
        _check_resolution(grid, max_ratio)
        gf = _march_grid(field, grid, c, order, stop, 3)
        if not _touches_boundary(gf, r):
            return gf
        half *= 1.5
    raise BallEscapesDomain(f"could not enclose B_g(center, {r})")


def _touches_boundary(gf: GridField, r: float) -> bool:
    T = gf.distance
    for k in range(T.ndim):
        for idx in (0, -1):
            face = np.take(T, idx, axis=k)
            if np.any(face <= r):
                return True
    return False


# -- 2D level-set integrals -------------------------------------------------

def _triangles(gf: GridField, r: float):
    """Split each grid square into two triangles touching ``{T <= r}``."""
    T = gf.distance
    x, y = gf.axes()
    t00, t10, t01, t11 = T[:-1, :-1], T[1:, :-1], T[:-1, 1:], T[1:, 1:]
    touch = np.minimum(np.minimum(t00, t10), np.minimum(t01, t11)) <= r
    I, J = np.nonzero(touch)
    X0, X1, Y0, Y1 = x[I], x[I + 1], y[J], y[J + 1]
    p00 = np.stack([X0, Y0], 1)
    p10 = np.stack([X1, Y0], 1)
    p01 = np.stack([X0, Y1], 1)
    p11 = np.stack([X1, Y1], 1)
    a, b, c, d = t00[I, J], t10[I, J], t01[I, J], t11[I, J]
    P = np.concatenate([np.stack([p00, p10, p11], 1), np.stack([p00, p11, p01], 1)])
    V = np.concatenate([np.stack([a, b, d], 1), np.stack([a, d, c], 1)])
    keep = V.min(1) <= r
    return P[keep], V[keep]


def _roll_to(P, V, lead):
    """Reorder triangle vertices so that vertex ``lead`` comes first."""
    idx = (lead[:, None] + np.arange(3)[None, :]) % 3
    rows = np.arange(len(P))[:, None]
    return P[rows, idx], V[rows, idx]


def _tri_area(a, b, c):
    u, v = b - a, c - a
    return 0.5 * np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])


def _cross(pa, pb, ta, tb, r):
    s = (r - ta) / (tb - ta)
    return pa + s[:, None] * (pb - pa)


def _split(gf: GridField, r: float):
    P, V = _triangles(gf, r)
    inside = V <= r
    k = inside.sum(1)
    full = k == 3
    one = k == 1
    two = k == 2
    # k == 1: lone inside vertex first; k == 2: lone outside vertex first
    P1, V1 = _roll_to(P[one], V[one], np.argmax(inside[one], 1))
    P2, V2 = _roll_to(P[two], V[two], np.argmin(inside[two], 1))
    return P[full], (P1, V1), (P2, V2), (P[two], V[two])


def ball_area_2d(field: DensityField, gf: GridField, r: float) -> float:
    """``Vol_g({T <= r})`` for piecewise-linear ``T``, centroid rule per piece."""
    w = lambda p: np.exp(2 * field.u(p))  # noqa: E731
    Pf, (P1, V1), (P2, V2), (P2raw, _) = _split(gf, r)
    total = (w(Pf.mean(1)) * _tri_area(Pf[:, 0], Pf[:, 1], Pf[:, 2])).sum()
    a, b, c = P1[:, 0], P1[:, 1], P1[:, 2]
    pab = _cross(a, b, V1[:, 0], V1[:, 1], r)
    pac = _cross(a, c, V1[:, 0], V1[:, 2], r)
    total += (w((a + pab + pac) / 3) * _tri_area(a, pab, pac)).sum()
    a, b, c = P2[:, 0], P2[:, 1], P2[:, 2]
    pab = _cross(a, b, V2[:, 0], V2[:, 1], r)
    pac = _cross(a, c, V2[:, 0], V2[:, 2], r)
    total += (w(P2raw.mean(1)) * _tri_area(P2raw[:, 0], P2raw[:, 1], P2raw[:, 2])).sum()
    total -= (w((a + pab + pac) / 3) * _tri_area(a, pab, pac)).sum()
    return float(total)


def level_length_2d(field: DensityField, gf: GridField, r: float) -> float:
    """g-length of the level set ``{T = r}`` from its marching-triangle segments."""
    _, (P1, V1), (P2, V2), _ = _split(gf, r)
    segs = []
    for P, V in ((P1, V1), (P2, V2)):
        a, b, c = P[:, 0], P[:, 1], P[:, 2]
        segs.append((_cross(a, b, V[:, 0], V[:, 1], r), _cross(a, c, V[:, 0], V[:, 2], r)))
    p = np.concatenate([s[0] for s in segs])
    q = np.concatenate([s[1] for s in segs])
    mid = 0.5 * (p + q)
    return float((np.sqrt(((q - p) ** 2).sum(1)) * field.line_density(mid)).sum())


def ball_volume_3d(field: DensityField, gf: GridField, r: float) -> float:
    """Voxel sum of ``e^{3u}`` with a linear ramp across the level set."""
    T = gf.distance
    Tf = np.where(np.isfinite(T), T, 2 * r + 10 * gf.delta)
    grads = np.gradient(Tf, gf.delta)
    width = gf.delta * sum(np.abs(g) for g in grads)
    # one-sided garbage next to unreached nodes would inflate the ramp
    width = np.clip(width, 1e-300, 2 * gf.delta * gf.line_density)
    frac = np.clip(0.5 + (r - Tf) / width, 0.0, 1.0)
    near = frac > 0
    pts = gf.nodes()[near.ravel()]
    return float((frac[near] * np.exp(3 * field.u(pts))).sum() * gf.delta**3)


def ball_volume(field: DensityField, center, r: float, delta: float,
                box: Optional[DomainBox] = None, order: int = 2) -> float:
    """g-volume of the geodesic ball ``B_g(center, r)`` (m = 2 or 3)."""
    gf = local_distance(field, center, r, delta, box, order)
    if field.dim == 2:
        return ball_area_2d(field, gf, r)
    if field.dim == 3:
        return ball_volume_3d(field, gf, r)
    raise WrongDimension("ball_volume supports m = 2 or 3")


def circle_perimeter_2d(field: DensityField, center, r: float, delta: float,
                        box: Optional[DomainBox] = None, order: int = 2) -> float:
    """g-length of the geodesic circle ``{d_g(center, .) = r}``."""
    if field.dim != 2:
        raise WrongDimension("circle perimeter needs m = 2")
    gf = local_distance(field, center, r, delta, box, order)
    return level_length_2d(field, gf, r)


def disk_measurements(field: DensityField, center, radii, delta: float,
                      order: int = 2) -> tuple:
    """Perimeters and areas of several geodesic circles from a single solve."""
    if field.dim != 2:
        raise WrongDimension("disk measurements need m = 2")
    gf = local_distance(field, center, float(max(radii)), delta, None, order)
    per = np.array([level_length_2d(field, gf, r) for r in radii])
    area = np.array([ball_area_2d(field, gf, r) for r in radii])
    return per, area


def small_ball_prediction(m: int, r: float, R: float) -> float:
    """``omega_m r^m (1 - R r^2 / (6(m+2)))``."""
    if m not in (2, 3, 4):
        raise WrongDimension("small-ball coefficients are tabulated for m = 2, 3, 4")
    om = math.pi ** (m / 2) / math.gamma(m / 2 + 1)
    return om * r**m * (1 - R * r * r / (6 * (m + 2)))
