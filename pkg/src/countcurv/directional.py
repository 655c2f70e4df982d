"""Sectional curvature from tube-restricted counts and its 3D assembly.

A slice ``Sigma = exp_x(span{X, Y})`` is discretized by shooting g-geodesics
from ``x`` over a fan of directions.  Cells whose realization lies within
g-distance ``tau a`` of the slice form the Fermi tube; the tube mass divided
by its thickness gives an in-slice area and thus a reconstructed radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .complex import CellComplex
from .errors import (
    EmptyTube,
    GeodesicLeftDomain,
    MissingMetadata,
    ResolutionTooCoarse,
    SliceTooSmall,
    WrongDimension,
)
from .oracle.fields import DensityField, DomainBox

# Coefficient of the sectional formula as displayed, and the one that
# reproduces K under the planar area protocol (r_c^2 = rho^2 (1 - K rho^2/12)).
LITERAL_COEFFICIENT = 3.0
PLANAR_COEFFICIENT = 12.0
NORMALIZATIONS = {"literal": LITERAL_COEFFICIENT, "planar": PLANAR_COEFFICIENT}

AXIS_PLANES = {"12": (0, 1), "13": (0, 2), "23": (1, 2)}
# 2-forms over (sigma1, sigma2, sigma3) = (e2^e3, e3^e1, e1^e2) whose
# sectional values polarize M23, M13 and M12
POLARIZED_FORMS = {
    "p23": (0.0, 1.0, -1.0),
    "p13": (1.0, 0.0, -1.0),
    "p12": (1.0, -1.0, 0.0),
}
SIX_PLANES = ("12", "13", "23", "p23", "p13", "p12")


@dataclass(frozen=True, eq=False)
class SlicePlane:
    """Geodesic surface through ``base`` with in-slice polar coordinates.

    ``points[i, k]`` is the point at g-arclength ``rho[i]`` along the ray of
    angle ``theta[k]``; ``velocity`` holds the unit-speed tangents.
    """

    base: np.ndarray
    frame: np.ndarray  # (2, m) Euclidean-orthonormal, g-orthogonal at base
    points: np.ndarray
    velocity: np.ndarray
    rho: np.ndarray
    theta: np.ndarray
    extent: float
    form: Optional[tuple] = None
    label: str = ""
    _tree: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.base.shape[0]

    def cloud(self) -> np.ndarray:
        return self.points.reshape(-1, self.dim)

    def normals(self) -> np.ndarray:
        """Unit normals of the surface at every cloud point (3D only)."""
        dth = np.gradient(self.points, self.theta, axis=1)
        n = np.cross(self.velocity, dth)
        n[0] = np.cross(self.frame[0], self.frame[1])
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        return n.reshape(-1, 3)

    def kdtree(self) -> cKDTree:
        if "tree" not in self._tree:
            self._tree["tree"] = cKDTree(self.cloud())
        return self._tree["tree"]


@dataclass(frozen=True)
class TubeSpec:
    tau: float
    r: int
    a: float

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if self.a <= 0:
            raise ValueError("a must be positive")

    @property
    def half_thickness(self) -> float:
        return self.tau * self.a


@dataclass(frozen=True)
class CurvatureOperator3:
    M: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        if M.shape != (3, 3) or not np.array_equal(M, M.T):
            raise ValueError("curvature operator must be a symmetric 3x3 matrix")
        object.__setattr__(self, "M", M)


@dataclass(frozen=True)
class RicciScalarEstimate:
    ric_diag: tuple
    scalar: float


# -- frames ----------------------------------------------------------------

def plane_frame(plane, rotation: Optional[np.ndarray] = None) -> tuple:
    """Euclidean-orthonormal pair spanning a named plane of a 3D frame.

    ``plane`` is an axis label (``"12"``, ``"13"``, ``"23"``), a polarized
    label (``"p23"``, ...) or three 2-form coefficients over
    ``(e2^e3, e3^e1, e1^e2)``.  The plane of a simple 2-form is the
    orthogonal complement of its Hodge dual; ``X ^ Y`` reproduces the form.
    """
    Q = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
    if isinstance(plane, str) and plane in AXIS_PLANES:
        i, j = AXIS_PLANES[plane]
        return Q[:, i], Q[:, j], None
    coeffs = POLARIZED_FORMS[plane] if isinstance(plane, str) else tuple(plane)
    n = np.asarray(coeffs, dtype=float)
    if n.shape != (3,) or not np.linalg.norm(n) > 0:
        raise ValueError(f"bad plane specification {plane!r}")
    n = n / np.linalg.norm(n)
    # X: the coordinate axis most orthogonal to n, projected
    k = int(np.argmin(np.abs(n)))
    X = np.eye(3)[k] - n[k] * n
    X /= np.linalg.norm(X)
    Y = np.cross(n, X)
    return Q @ X, Q @ Y, tuple(float(c) for c in n)


# -- geodesic shooting ------------------------------------------------------

def _geodesic_rhs(field: DensityField, x: np.ndarray, v: np.ndarray):
    """Second derivative of g-geodesics written in Euclidean coordinates."""
    gu = field.grad_u(x)
    return v, -2.0 * (gu * v).sum(-1, keepdims=True) * v + (v * v).sum(-1, keepdims=True) * gu


def build_slice(field: DensityField, base, plane, extent: float, delta: float,
                n_theta: int = 96, box: Optional[DomainBox] = None,
                rotation: Optional[np.ndarray] = None) -> SlicePlane:
    """Discretize ``exp_base(span)`` by RK4 geodesic shooting with step ``delta``.

    ``plane`` is either a pair of Euclidean-orthonormal vectors or a label
    accepted by :func:`plane_frame` (3D).  In 2D the plane is the whole space.
    """
    base = np.asarray(base, dtype=float)
    m = base.shape[0]
    if field.dim != m:
        raise WrongDimension("field and base dimensions differ")
    if isinstance(plane, str) or np.ndim(plane) == 1:
        if m == 2:
            X, Y, form = np.array([1.0, 0.0]), np.array([0.0, 1.0]), None
        else:
            X, Y, form = plane_frame(plane, rotation)
        label = plane if isinstance(plane, str) else ""
    else:
        X, Y = (np.asarray(v, dtype=float) for v in plane)
        form, label = None, ""
    if abs(X @ Y) > 1e-12 or abs(X @ X - 1) > 1e-12 or abs(Y @ Y - 1) > 1e-12:
        raise ValueError("frame vectors must be Euclidean-orthonormal")
    n_rho = int(math.ceil(extent / delta))
    if n_rho < 8 or n_theta < 16:
        raise ResolutionTooCoarse("slice needs >= 8 radial steps and >= 16 rays")
    h = extent / n_rho
    theta = 2 * math.pi * np.arange(n_theta) / n_theta
    dirs = np.cos(theta)[:, None] * X + np.sin(theta)[:, None] * Y
    ell0 = float(field.line_density(base[None])[0])
    x = np.repeat(base[None], n_theta, 0)
    v = dirs / ell0  # unit g-speed
    pts = np.empty((n_rho + 1, n_theta, m))
    vel = np.empty((n_rho + 1, n_theta, m))
    pts[0], vel[0] = x, v
    for i in range(n_rho):
        k1x, k1v = _geodesic_rhs(field, x, v)
        k2x, k2v = _geodesic_rhs(field, x + 0.5 * h * k1x, v + 0.5 * h * k1v)
        k3x, k3v = _geodesic_rhs(field, x + 0.5 * h * k2x, v + 0.5 * h * k2v)
        k4x, k4v = _geodesic_rhs(field, x + h * k3x, v + h * k3v)
        x = x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if box is not None and not np.all(box.contains(x)):
            raise GeodesicLeftDomain(f"slice geodesics leave the box at arclength {(i + 1) * h:.4g}")
        pts[i + 1], vel[i + 1] = x, v
    return SlicePlane(base, np.stack([X, Y]), pts, vel, h * np.arange(n_rho + 1), theta,
                      float(extent), form, label)


def slice_areas(field: DensityField, sl: SlicePlane) -> np.ndarray:
    """g-area of the in-slice geodesic disks of radius ``sl.rho``."""
    m = sl.dim
    # spectral derivative in theta: the rings are smooth and periodic
    n = sl.points.shape[1]
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        k[n // 2] = 0.0
    dth = np.fft.ifft(1j * k[None, :, None] * np.fft.fft(sl.points, axis=1), axis=1).real
    if m == 2:
        cross = np.abs(sl.velocity[..., 0] * dth[..., 1] - sl.velocity[..., 1] * dth[..., 0])
    else:
        cross = np.linalg.norm(np.cross(sl.velocity, dth), axis=-1)
    w = np.exp(2 * field.u(sl.points))
    J = (w * cross).mean(axis=1) * 2 * math.pi  # integrate over theta
    # cumulative Simpson-free trapezoid in rho
    dr = sl.rho[1] - sl.rho[0]
    return np.concatenate([[0.0], np.cumsum(0.5 * (J[1:] + J[:-1]) * dr)])


def slice_gauss_oracle(field: DensityField, sl: SlicePlane, coefficient: float = PLANAR_COEFFICIENT,
                       fractions=(0.3, 0.45, 0.6, 0.75, 0.9)) -> float:
    """Intrinsic Gaussian curvature of the slice at its base.

    Applies ``coefficient (rho^2 - r_c^2)/rho^4`` with ``r_c = sqrt(A/pi)`` at
    several ``rho`` and extrapolates ``K + c rho^2`` to ``rho = 0``.
    """
    if len(sl.rho) < 16 or len(sl.theta) < 32:
        raise ResolutionTooCoarse("slice oracle needs >= 16 radial steps and >= 32 rays")
    A = slice_areas(field, sl)
    idx = np.unique(np.clip(np.round(np.asarray(fractions) * (len(sl.rho) - 1)).astype(int), 4, None))
    rho = sl.rho[idx]
    kg = coefficient * (rho**2 - A[idx] / math.pi) / rho**4
    design = np.stack([np.ones_like(rho), rho**2], 1)
    coef, *_ = np.linalg.lstsq(design, kg, rcond=None)
    return float(coef[0])


# -- tubes --------------------------------------------------------------------

def distance_to_slice(field: DensityField, sl: SlicePlane, points: np.ndarray):
    """g-distance from points to the slice and the rim flag of the foot point.

    The foot is the nearest cloud point; the offset is measured along its
    surface normal and scaled by the local line density.
    """
    P = np.asarray(points, dtype=float)
    _, idx = sl.kdtree().query(P)
    foot = sl.cloud()[idx]
    if sl.dim == 2:
        d = np.zeros(len(P))
    else:
        n = sl.normals()[idx]
        d = np.abs(((P - foot) * n).sum(1))
    d = d * field.line_density(foot)
    rim = idx // len(sl.theta) == len(sl.rho) - 1
    return d, rim


def tube_cells(complex: CellComplex, field: DensityField, sl: SlicePlane,
               spec: TubeSpec, center: int) -> np.ndarray:
    """Cells of ``B(center, r)`` within g-distance ``tau a`` of the slice, sorted."""
    if complex.positions is None:
        raise MissingMetadata("tube selection needs cell positions")
    dist = complex.bfs(center, spec.r)
    members = np.flatnonzero(dist >= 0)
    P = complex.positions[members]
    reach = float((np.sqrt(((P - sl.base) ** 2).sum(1)) * field.line_density(P)).max()) if len(P) else 0.0
    if reach > sl.extent:
        raise SliceTooSmall(f"ball reaches g-distance {reach:.4g} beyond slice extent {sl.extent:.4g}")
    d, rim = distance_to_slice(field, sl, P)
    inside = d <= spec.half_thickness
    if np.any(inside & rim):
        raise SliceTooSmall("tube cells project onto the slice rim")
    return members[inside]


def slice_radius(tube_mass: float, spec: TubeSpec) -> float:
    """``(nu(T) / (2 tau a pi))^(1/2)``."""
    if not tube_mass > 0:
        raise EmptyTube("tube has no mass")
    return math.sqrt(tube_mass / (2 * spec.tau * spec.a * math.pi))


@dataclass(frozen=True)
class TubeReference:
    """Mean tube mass per count radius on a flat complex (fixed ``tau``)."""

    tau: float
    a: float
    masses: dict  # r -> mean mass

    def radius(self, r: int) -> float:
        return slice_radius(self.masses[r], TubeSpec(self.tau, r, self.a))

    def to_json(self) -> dict:
        return {"tau": self.tau, "a": self.a,
                "masses": {str(k): v for k, v in sorted(self.masses.items())}}


@dataclass(frozen=True)
class TubeMeasurement:
    cells: int
    mass: float
    R_c: float


def measure_tube(complex: CellComplex, field: DensityField, sl: SlicePlane,
                 spec: TubeSpec, center: int) -> TubeMeasurement:
    """Tube cell count, tube mass and reconstructed slice radius."""
    cells = tube_cells(complex, field, sl, spec, center)
    w = complex.weights
    if w is None:
        raise MissingMetadata("sectional estimator needs cell weights")
    mass = float(w[cells].sum()) if cells.size else 0.0
    return TubeMeasurement(int(cells.size), mass, slice_radius(mass, spec))


def sectional_value(R_c: float, spec: TubeSpec, normalization: str = "literal",
                    reference: Optional[TubeReference] = None) -> float:
    """``c (r^2 - (R_c/a)^2) / r^4``, or ``c (R_0^2 - R_c^2) / R_0^4`` with a reference."""
    c = NORMALIZATIONS[normalization]
    if reference is not None:
        R0 = reference.radius(spec.r)
        return c * (R0**2 - R_c**2) / R0**4
    r = spec.r
    return c * (r**2 - (R_c / spec.a) ** 2) / r**4


def sectional_estimator(complex: CellComplex, field: DensityField, sl: SlicePlane,
                        spec: TubeSpec, center: int, normalization: str = "literal",
                        reference: Optional[TubeReference] = None) -> float:
    """``c (r^2 - (R_c/a)^2) / r^4`` from the tube mass.

    ``normalization="literal"`` uses ``c = 3`` (which measures ``K/4``);
    ``"planar"`` uses ``c = 12``.  With a flat ``reference`` the count radius
    is replaced by the calibrated flat slice radius ``R_0(r)`` and the formula
    is evaluated in physical units: ``c (R_0^2 - R_c^2) / R_0^4``.
    """
    meas = measure_tube(complex, field, sl, spec, center)
    return sectional_value(meas.R_c, spec, normalization, reference)


def tube_reference(complex: CellComplex, field: DensityField, centers: Sequence[int],
                   radii: Sequence[int], tau: float, planes=("12", "13", "23"),
                   delta: Optional[float] = None) -> TubeReference:
    a = complex.mesh_scale
    masses = {}
    for r in radii:
        vals = []
        for c in centers:
            base = complex.positions[c]
            ext = slice_extent(complex, field, c, r)
            for p in planes:
                sl = build_slice(field, base, p, ext, delta or a / 2)
                cells = tube_cells(complex, field, sl, TubeSpec(tau, r, a), c)
                vals.append(float(complex.weights[cells].sum()))
        masses[int(r)] = float(np.mean(vals))
    return TubeReference(float(tau), float(a), masses)


def slice_extent(complex: CellComplex, field: DensityField, center: int, r: int,
                 factor: float = 1.5) -> float:
    """Slice radius covering the count ball with ``factor`` slack."""
    dist = complex.bfs(center, r)
    P = complex.positions[dist >= 0]
    base = complex.positions[center]
    reach = float((np.sqrt(((P - base) ** 2).sum(1)) * field.line_density(P)).max())
    return factor * max(reach, complex.mesh_scale)


# -- assembly -----------------------------------------------------------------

def reconstruct_operator_3d(axis: dict, polarized: dict,
                            polarization: str = "identity") -> CurvatureOperator3:
    """Curvature operator from three axis and three polarized sectionals.

    ``axis`` maps ``"12"``, ``"13"``, ``"23"`` to sectional values and
    ``polarized`` maps ``"p23"``, ``"p13"``, ``"p12"``.  The diagonal is
    ``M11 = K23, M22 = K13, M33 = K12``.  For the unit form
    ``xi = (s_b - s_c)/sqrt 2``, ``K(xi) = (M_bb + M_cc)/2 - M_bc``, so the
    default ``identity`` mode sets ``M_bc = (M_bb + M_cc)/2 - K(xi)``.
    ``polarization="literal"`` instead uses ``(M_bb + M_cc - K(xi))/2``.
    """
    d = np.array([axis["23"], axis["13"], axis["12"]], dtype=float)
    M = np.diag(d)
    for key, (b, c) in (("p23", (1, 2)), ("p13", (0, 2)), ("p12", (0, 1))):
        k = float(polarized[key])
        if polarization == "identity":
            v = 0.5 * (d[b] + d[c]) - k
        elif polarization == "literal":
            v = 0.5 * (d[b] + d[c] - k)
        else:
            raise ValueError(f"unknown polarization mode {polarization!r}")
        M[b, c] = M[c, b] = v
    return CurvatureOperator3(M)


def ricci_scalar_assembly(K12: float, K13: float, K23: float) -> RicciScalarEstimate:
    """``Ric_ii`` as sums of the two sectionals containing ``e_i``; ``R = 2 sum K``."""
    return RicciScalarEstimate((K12 + K13, K12 + K23, K13 + K23), 2.0 * (K12 + K13 + K23))
