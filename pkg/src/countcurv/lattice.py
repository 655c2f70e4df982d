"""Uniform l1 lattices on Z^m, their exact ball counts and calibration constants."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .complex import CellComplex, from_csr
from .errors import BinomialOverflow, ExtentTooLarge, UnsupportedDimension

MAX_LATTICE_CELLS = 20_000_000
_I64_MAX = 2**63 - 1


class CalibrationKind(str, Enum):
    L1 = "l1"
    EUCLIDEAN = "euclidean"


@dataclass(frozen=True)
class Calibration:
    """Baseline growth constants.

    ``alpha1`` is the sphere-growth coefficient (``|S(r)| ~ alpha1 r^(m-1)``)
    and ``beta_m`` the ball-growth coefficient (``|B(r)| ~ beta_m r^m``).
    """

    kind: CalibrationKind
    m: int
    alpha1: float
    beta_m: float


def unit_ball_volume(m: int) -> float:
    """Euclidean unit-ball volume omega_m."""
    return math.pi ** (m / 2) / math.gamma(m / 2 + 1)


def calibration_for(kind, m: int) -> Calibration:
    """Calibration constants for ``kind`` in dimension ``m`` (1..4).

    For the l1 lattice ``beta_m = 2^m/m!`` (2, 2, 4/3, 2/3) and ``alpha1`` is
    the leading coefficient ``2^m/(m-1)!`` of ``|S_m(r)|``; it equals 4 in
    the plane.  The Euclidean kind uses ``beta_m = omega_m`` and
    ``alpha1 = m omega_m``, the unit-sphere area.
    """
    kind = CalibrationKind(kind)
    if int(m) != m or not 1 <= m <= 4:
        raise UnsupportedDimension(f"dimension {m} not in 1..4")
    m = int(m)
    if kind is CalibrationKind.L1:
        return Calibration(kind, m, 2.0**m / math.factorial(m - 1), 2.0**m / math.factorial(m))
    om = unit_ball_volume(m)
    return Calibration(kind, m, m * om, om)


def baseline_ball_count(m: int, r: int) -> int:
    """Exact ``|B_m(r)| = sum_k 2^k C(m,k) C(r,k)`` for the l1 lattice."""
    if m < 1 or r < 0:
        raise ValueError("need m >= 1 and r >= 0")
    total = sum(2**k * math.comb(m, k) * math.comb(r, k) for k in range(min(m, r) + 1))
    if total > _I64_MAX:
        raise BinomialOverflow(f"|B_{m}({r})| exceeds 64 bits")
    return total


def baseline_sphere_count(m: int, r: int) -> int:
    """Exact ``|S_m(r)| = |B_m(r)| - |B_m(r-1)|`` with ``|S_m(0)| = 1``."""
    if r == 0:
        return 1
    return baseline_ball_count(m, r) - baseline_ball_count(m, r - 1)


@dataclass(frozen=True)
class LatticeSpec:
    """Cells ``x in Z^m`` with ``|x|_inf <= E`` (cube) or ``|x|_1 <= E`` (l1_ball).

    The l1 ball is the smallest region containing every count ball of radius
    ``E`` about the origin; it keeps 4D lattices at radius 50 tractable.
    """

    dim: int
    half_extent: int
    shape: str = "cube"

    def __post_init__(self):
        if not 1 <= self.dim <= 4:
            raise UnsupportedDimension(f"dimension {self.dim} not in 1..4")
        if self.half_extent < 1:
            raise ValueError("half_extent must be >= 1")
        if self.shape not in ("cube", "l1_ball"):
            raise ValueError(f"unknown lattice shape {self.shape!r}")

    @property
    def cell_count(self) -> int:
        if self.shape == "cube":
            return (2 * self.half_extent + 1) ** self.dim
        return baseline_ball_count(self.dim, self.half_extent)

    def index_of(self, coords) -> int:
        """Cell id of the integer point ``coords``."""
        x = np.asarray(coords, dtype=np.int64).reshape(self.dim)
        E, m = self.half_extent, self.dim
        if self.shape == "cube":
            if np.abs(x).max() > E:
                raise IndexError(f"{coords} outside the lattice")
            return int(np.dot(x + E, (2 * E + 1) ** np.arange(m)))
        if np.abs(x).sum() > E:
            raise IndexError(f"{coords} outside the lattice")
        starts = _l1_row_starts(m, E)
        p = int(np.dot(x[:-1] + E, (2 * E + 1) ** np.arange(m - 1)))
        s = int(np.abs(x[:-1]).sum())
        return int(starts[p] + x[-1] + (E - s))


def _prefix_coords(k: int, E: int) -> np.ndarray:
    """All points of ``[-E, E]^k`` in flat order (axis 0 fastest)."""
    side = 2 * E + 1
    flat = np.arange(side**k, dtype=np.int64)
    out = np.empty((side**k, k), dtype=np.int64)
    for i in range(k):
        out[:, i] = (flat // side**i) % side - E
    return out


def _l1_row_starts(m: int, E: int) -> np.ndarray:
    pre = _prefix_coords(m - 1, E)
    s = np.abs(pre).sum(axis=1)
    lens = np.where(s <= E, 2 * (E - s) + 1, 0)
    starts = np.zeros(len(lens) + 1, dtype=np.int64)
    np.cumsum(lens, out=starts[1:])
    return starts


def generate_l1_lattice(spec: LatticeSpec, max_cells: int = MAX_LATTICE_CELLS) -> CellComplex:
    """Build the lattice with unit-step adjacency, unit weights and integer positions."""
    n = spec.cell_count
    if n > max_cells:
        raise ExtentTooLarge(f"{n} cells exceeds the limit of {max_cells}")
    m, E = spec.dim, spec.half_extent
    side = 2 * E + 1
    if spec.shape == "cube":
        coords = _prefix_coords(m, E)
        ids = np.arange(n, dtype=np.int64)
        cols = []
        for i in reversed(range(m)):
            cols.append(np.where(coords[:, i] > -E, ids - side**i, -1))
        for i in range(m):
            cols.append(np.where(coords[:, i] < E, ids + side**i, -1))
    else:
        pre = _prefix_coords(m - 1, E)
        s = np.abs(pre).sum(axis=1)
        lens = np.where(s <= E, 2 * (E - s) + 1, 0)
        starts = np.zeros(len(lens) + 1, dtype=np.int64)
        np.cumsum(lens, out=starts[1:])
        row = np.repeat(np.arange(len(lens), dtype=np.int64), lens)
        ids = np.arange(n, dtype=np.int64)
        last = ids - starts[row] - (E - s[row])
        coords = np.empty((n, m), dtype=np.int64)
        coords[:, :m - 1] = pre[row]
        coords[:, m - 1] = last
        del pre
        absl = np.abs(last)
        cols = []

        def prefix_step(i, sign):
            xi = coords[:, i] + sign
            ok = np.abs(xi) <= E
            s2 = s[row] - np.abs(coords[:, i]) + np.abs(xi)
            ok &= absl <= E - s2
            p2 = row + sign * side**i
            return np.where(ok, starts[np.where(ok, p2, 0)] + last + (E - s2), -1)

        for i in reversed(range(m - 1)):
            cols.append(prefix_step(i, -1))
        lo = E - s[row]
        cols.append(np.where(last > -lo, ids - 1, -1))
        cols.append(np.where(last < lo, ids + 1, -1))
        for i in range(m - 1):
            cols.append(prefix_step(i, +1))
    nb = np.stack(cols, axis=1)
    del cols
    mask = nb >= 0
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(mask.sum(axis=1), out=indptr[1:])
    indices = nb[mask].astype(np.int32)
    del nb, mask
    return from_csr(indptr, indices, np.ones(n), coords.astype(np.float64),
                    mesh_scale=1.0, degree_bound=max(2 * m, 1), validate=False)
