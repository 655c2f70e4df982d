"""Counts-only curvature diagnostics.

All estimators turn a ball or sphere count at count radius ``r`` into a
reconstructed radius ``r_c`` through a :class:`~countcurv.lattice.Calibration`
and compare it with ``r``.  The calibration is always explicit: lattice
diagnostics use the l1 constants, curvature identification uses ``omega_m``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .complex import CellComplex, layer_masses
from .errors import MissingMetadata, NonPositiveCount, WrongDimension
from .lattice import Calibration, CalibrationKind
from .oracle.curvature import gauss_curvature_2d, scalar_curvature
from .oracle.eikonal import geodesic_distance
from .oracle.fields import DensityField, DomainBox

KINDS = ("unified", "r_normalized", "density_form", "excess_per", "excess_area")


@dataclass(frozen=True)
class EstimatorKind:
    """Estimator family and the dimension of the count it consumes.

    ``unified`` with ``m = 1`` is the perimeter estimator (sphere counts of a
    planar complex); ``excess_per`` / ``excess_area`` report ``delta r``.
    """

    name: str
    m: int

    def __post_init__(self):
        if self.name not in KINDS:
            raise ValueError(f"unknown estimator kind {self.name!r}")
        if not 1 <= self.m <= 4:
            raise WrongDimension(f"dimension {self.m} not in 1..4")
        if self.name in ("r_normalized", "density_form") and self.m < 2:
            raise WrongDimension(f"{self.name} needs m >= 2")

    @property
    def uses_sphere(self) -> bool:
        return (self.name == "unified" and self.m == 1) or self.name == "excess_per"

    def __str__(self) -> str:
        return f"{self.name}({self.m})"


@dataclass(frozen=True)
class EstimateRecord:
    center: int
    r: int
    a: float
    raw_count: float
    r_c: float
    rho: float
    kind: str
    value: float
    oracle_value: Optional[float] = None
    abs_error: Optional[float] = None
    averaged_value: Optional[float] = None
    radius: Optional[float] = None
    error: Optional[str] = None

    def with_oracle(self, oracle: float) -> "EstimateRecord":
        return replace(self, oracle_value=float(oracle), abs_error=abs(self.value - float(oracle)))


@dataclass(frozen=True)
class AdmissibleRange:
    r_min: int
    r_max: int

    @property
    def empty(self) -> bool:
        return self.r_max < self.r_min


# -- scalar formulas ---------------------------------------------------------

def reconstructed_radius(count: float, m: int, cal: Calibration) -> float:
    """``(count / beta_m)^(1/m)``; sphere counts (``m = 1``) use ``count / alpha1``."""
    if not count > 0:
        raise NonPositiveCount(f"count must be positive, got {count!r}")
    if m == 1:
        return count / cal.alpha1
    return (count / cal.beta_m) ** (1.0 / m)


def excess_radius(r: float, r_c: float) -> float:
    """``delta r = r - r_c``."""
    return r - r_c


def unified_estimator(r: float, r_c: float, m: int) -> float:
    """``(6/m)(r^m - r_c^m) / r^(m+2)``."""
    return (6.0 / m) * (r**m - r_c**m) / r ** (m + 2)


def r_normalized_estimator(r: float, r_c: float, m: int) -> float:
    """``6(m+2)(r^m - r_c^m) / r^(m+2)``."""
    return 6.0 * (m + 2) * (r**m - r_c**m) / r ** (m + 2)


def density_estimator(count: float, r: float, m: int, beta_m: float) -> tuple:
    """Local density ``rho = count/(beta_m r^m)`` and ``6(m+2)(1 - rho)/r^2``."""
    if not count > 0:
        raise NonPositiveCount(f"count must be positive, got {count!r}")
    if not r > 0:
        raise ValueError("r must be positive")
    rho = count / (beta_m * r**m)
    return rho, 6.0 * (m + 2) * (1.0 - rho) / r**2


def continuum_limit(kind: EstimatorKind, field: DensityField, x) -> float:
    """What ``kind`` converges to on smooth data at ``x``.

    Perimeter counts give ``K``; the unified estimator on m-volumes gives
    ``R / (m(m+2))`` (``K/4`` for areas); the R-normalized and density forms
    give ``R``.  Excess radii have no pointwise limit and return ``nan``.
    """
    x = np.asarray(x, dtype=float)
    if kind.name in ("excess_per", "excess_area"):
        return float("nan")
    if kind.name == "unified" and kind.m == 1:
        return float(gauss_curvature_2d(field, x))
    R = float(scalar_curvature(field, x))
    if kind.name == "unified":
        return R / (kind.m * (kind.m + 2))
    return R


# -- flat reference ----------------------------------------------------------

@dataclass(frozen=True)
class FlatReference:
    """Mean ball mass per count radius measured on a flat complex.

    On a Voronoi complex one count step spans more than ``a`` of metric
    distance; ``radius(r) = (mass(r)/beta_m)^(1/m)`` is the physical radius
    that a count ball of radius ``r`` covers in flat space.
    """

    m: int
    masses: tuple  # mean flat mass for r = 0..len-1
    spread: tuple  # relative standard deviation across centres
    beta_m: float

    def radius(self, r: int) -> float:
        return (self.masses[r] / self.beta_m) ** (1.0 / self.m)

    def to_json(self) -> dict:
        return {"m": self.m, "masses": list(self.masses), "spread": list(self.spread),
                "beta_m": self.beta_m}

    @classmethod
    def from_json(cls, d: dict) -> "FlatReference":
        return cls(int(d["m"]), tuple(d["masses"]), tuple(d["spread"]), float(d["beta_m"]))


def flat_reference(complex: CellComplex, centers: Sequence[int], r_max: int,
                   cal: Calibration) -> FlatReference:
    """Average ball masses over ``centers`` of a flat weighted complex."""
    if complex.weights is None:
        raise MissingMetadata("flat reference needs cell weights")
    M = np.array([np.cumsum(layer_masses(complex, int(c), r_max)) for c in centers])
    mean = M.mean(0)
    spread = M.std(0) / mean
    return FlatReference(cal.m, tuple(float(v) for v in mean),
                         tuple(float(v) for v in spread), cal.beta_m)


# -- admissible radii -------------------------------------------------------

def admissible_r_max(complex: CellComplex, center: int, K: DomainBox, C: float = 1.0,
                     field: Optional[DensityField] = None,
                     delta: Optional[float] = None) -> AdmissibleRange:
    """``floor((dist_g(Phi(x), dK) - C a)/a)``, further capped so the count
    ball stays inside ``K``.

    Without a field the Euclidean distance is used (u = 0).
    """
    if complex.positions is None or complex.mesh_scale is None:
        raise MissingMetadata("admissible radii need positions and mesh_scale")
    a = complex.mesh_scale
    x = complex.positions[center]
    if not K.contains(x):
        return AdmissibleRange(1, 0)
    if field is None:
        d = float(K.distance_to_boundary(x))
    else:
        step = delta or a / 4
        gf = geodesic_distance(field, x, K, step)
        T = gf.distance
        faces = [np.take(T, idx, axis=k) for k in range(T.ndim) for idx in (0, -1)]
        d = float(min(f.min() for f in faces))
    r_max = max(int(math.floor((d - C * a) / a + 1e-9)), 0)
    # never let the count ball leave K
    while r_max > 0:
        dist = complex.bfs(center, r_max)
        if np.all(K.contains(complex.positions[dist >= 0])):
            break
        r_max -= 1
    return AdmissibleRange(1, r_max)


# -- batch driver ------------------------------------------------------------

def _threads(threads: Optional[int]) -> int:
    if threads is not None:
        return max(1, int(threads))
    return max(1, int(os.environ.get("COUNTCURV_THREADS", "1")))


def estimate_center(complex: CellComplex, kind: EstimatorKind, center: int,
                    radii: Sequence[int], cal: Calibration,
                    use_weights: Optional[bool] = None,
                    reference: Optional[FlatReference] = None) -> list:
    """Records for one centre over several count radii (one BFS)."""
    if use_weights is None:
        use_weights = cal.kind is CalibrationKind.EUCLIDEAN and complex.weights is not None
    a = complex.mesh_scale if complex.mesh_scale is not None else 1.0
    rmax = int(max(radii))
    layers = layer_masses(complex, center, rmax, use_weights=use_weights)
    balls = np.cumsum(layers)
    out = []
    m = kind.m
    for r in radii:
        r = int(r)
        if r < 1:
            out.append(EstimateRecord(center, r, a, float("nan"), float("nan"), float("nan"),
                                      str(kind), float("nan"), error="r must be >= 1"))
            continue
        count = float(layers[r] if kind.uses_sphere else balls[r])
        if use_weights:
            R = reference.radius(r) if reference is not None else a * r
        else:
            R = float(r)
        try:
            rc = reconstructed_radius(count, m, cal)
        except NonPositiveCount as exc:
            out.append(EstimateRecord(center, r, a, count, float("nan"), float("nan"),
                                      str(kind), float("nan"), radius=R, error=str(exc)))
            continue
        rho = count / (cal.beta_m * R**m) if m > 1 else count / (cal.alpha1 * R)
        if kind.name == "unified":
            val = unified_estimator(R, rc, m)
        elif kind.name == "r_normalized":
            val = r_normalized_estimator(R, rc, m)
        elif kind.name == "density_form":
            rho, val = density_estimator(count, R, m, cal.beta_m)
        else:
            val = excess_radius(R, rc)
        out.append(EstimateRecord(center, r, a, count, rc, rho, str(kind), float(val), radius=R))
    return out


def estimate_field(complex: CellComplex, field: Optional[DensityField], kind: EstimatorKind,
                   centers: Iterable[int], radii: Sequence[int], calibration: Calibration,
                   use_weights: Optional[bool] = None,
                   reference: Optional[FlatReference] = None,
                   average_radius: Optional[int] = None,
                   threads: Optional[int] = None) -> list:
    """Evaluate ``kind`` at every ``(center, r)``.

    Records come out ordered by centre (input order) then radius.  Per-record
    failures are stored in ``error`` instead of aborting the run.  With
    ``average_radius`` each record also carries the mean value over records
    at the same ``r`` whose centres lie within that count distance.
    """
    centers = [int(c) for c in centers]
    if not centers:
        return []
    radii = [int(r) for r in radii]

    def one(c):
        try:
            recs = estimate_center(complex, kind, c, radii, calibration, use_weights, reference)
        except Exception as exc:  # noqa: BLE001 - reported per record
            return [EstimateRecord(c, r, complex.mesh_scale or 1.0, float("nan"), float("nan"),
                                   float("nan"), str(kind), float("nan"), error=str(exc))
                    for r in radii]
        if field is not None and complex.positions is not None:
            lim = continuum_limit(kind, field, complex.positions[c])
            if math.isfinite(lim):
                recs = [rec.with_oracle(lim) if rec.error is None else rec for rec in recs]
        return recs

    n = _threads(threads)
    if n > 1:
        with ThreadPoolExecutor(n) as pool:
            blocks = list(pool.map(one, centers))
    else:
        blocks = [one(c) for c in centers]
    records = [rec for b in blocks for rec in b]
    if average_radius is not None:
        records = ball_average(complex, records, average_radius)
    return records


def ball_average(complex: CellComplex, records: list, s: int) -> list:
    """Attach the mean value over estimated centres in ``B(center, s)``."""
    by_center = {}
    for rec in records:
        by_center.setdefault(rec.center, {})[rec.r] = rec
    ids = np.array(sorted(by_center))
    out = []
    cache = {}
    for rec in records:
        if rec.center not in cache:
            dist = complex.bfs(rec.center, s)
            cache[rec.center] = ids[dist[ids] >= 0]
        vals = [by_center[c][rec.r].value for c in cache[rec.center]
                if rec.r in by_center[c] and by_center[c][rec.r].error is None]
        out.append(replace(rec, averaged_value=float(np.mean(vals)) if vals else None))
    return out
