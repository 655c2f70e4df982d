"""Smooth scalar fields on boxes of R^m.

A :class:`DensityField` carries the log line density ``u`` of the conformal
metric ``g = e^{2u} g0`` together with its first and second derivatives.
Every evaluator is vectorized: points are arrays of shape ``(..., m)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import ConfigError, WrongDimension

Fn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DomainBox:
    """Axis-aligned box ``[lower, upper]`` with an inner safety margin."""

    lower: tuple
    upper: tuple
    margin: float = 0.0

    def __post_init__(self):
        lo = tuple(float(x) for x in self.lower)
        hi = tuple(float(x) for x in self.upper)
        if len(lo) != len(hi) or not lo:
            raise ValueError("lower and upper must have the same positive length")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError("lower < upper must hold componentwise")
        if self.margin < 0:
            raise ValueError("margin must be non-negative")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def shrink(self, d: float) -> "DomainBox":
        return DomainBox(tuple(self.lo + d), tuple(self.hi - d), self.margin)

    def inner(self) -> "DomainBox":
        """The compact region K: the box shrunk by its margin."""
        return self.shrink(self.margin)

    def contains(self, x, pad: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo + pad) & (x <= self.hi - pad), axis=-1)

    def distance_to_boundary(self, x) -> np.ndarray:
        """Euclidean distance from interior points to the box boundary."""
        x = np.asarray(x, dtype=float)
        return np.minimum(x - self.lo, self.hi - x).min(axis=-1)

    @classmethod
    def cube(cls, m: int, lo: float = 0.0, hi: float = 1.0, margin: float = 0.0):
        return cls((lo,) * m, (hi,) * m, margin)

    def to_json(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper), "margin": self.margin}

    @classmethod
    def from_json(cls, d: dict) -> "DomainBox":
        return cls(tuple(d["lower"]), tuple(d["upper"]), float(d.get("margin", 0.0)))


@dataclass(frozen=True)
class Provenance:
    kind: str  # "analytic" or "finite_difference"
    step: Optional[float] = None


ANALYTIC = Provenance("analytic")


def _fd_grad(f: Fn, m: int, step: float) -> Fn:
    def grad(x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        for k in range(m):
            e = np.zeros(m)
            e[k] = step
            out[..., k] = (f(x + e) - f(x - e)) / (2 * step)
        return out
    return grad


def _fd_hess(f: Fn, m: int, step: float) -> Fn:
    def hess(x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape + (m,))
        f0 = f(x)
        for i in range(m):
            ei = np.zeros(m)
            ei[i] = step
            out[..., i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / step**2
            for j in range(i):
                ej = np.zeros(m)
                ej[j] = step
                v = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * step**2)
                out[..., i, j] = v
                out[..., j, i] = v
        return out
    return hess


@dataclass(frozen=True, eq=False)
class SmoothFunction:
    """A C^2 scalar function with vectorized derivative access.

    Missing derivatives are filled by central differences; the provenance
    then records the step.
    """

    dim: int
    value: Fn
    grad: Fn
    laplacian: Fn
    hessian: Fn
    provenance: Provenance = ANALYTIC
    spec: dict = field(default_factory=dict)

    @classmethod
    def build(cls, dim: int, value: Fn, grad: Optional[Fn] = None,
              laplacian: Optional[Fn] = None, hessian: Optional[Fn] = None,
              step: float = 1e-3, spec: Optional[dict] = None):
        prov = ANALYTIC
        if grad is None or hessian is None or laplacian is None:
            prov = Provenance("finite_difference", float(step))
        grad = grad or _fd_grad(value, dim, step)
        if hessian is None:
            hessian = _fd_hess(value, dim, step)
        if laplacian is None:
            h = hessian
            laplacian = lambda x: np.trace(h(x), axis1=-2, axis2=-1)  # noqa: E731
        return cls(dim, value, grad, laplacian, hessian, prov, spec or {})

    def check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise WrongDimension(f"expected points in R^{self.dim}, got shape {x.shape}")
        return x

    def finite_difference(self, step: float = 1e-3) -> "SmoothFunction":
        """The same function with all derivatives replaced by central differences."""
        return type(self).build(self.dim, self.value, step=step, spec=self.spec)


class DensityField(SmoothFunction):
    """Log line density ``u`` of ``g = e^{2u} g0``."""

    def u(self, x):
        return self.value(self.check_point(x))

    def grad_u(self, x):
        return self.grad(self.check_point(x))

    def laplacian_u(self, x):
        return self.laplacian(self.check_point(x))

    def hessian_u(self, x):
        return self.hessian(self.check_point(x))

    def line_density(self, x):
        """The local yardstick ``e^{u(x)}``."""
        return np.exp(self.u(x))

    def volume_density(self, x):
        """Riemannian volume element ``e^{m u(x)}``."""
        return np.exp(self.dim * self.u(x))

    def shifted(self, c: float) -> "DensityField":
        """``u + c``: a global change of yardstick."""
        spec = dict(self.spec, shift=self.spec.get("shift", 0.0) + c) if self.spec else {}
        return DensityField(self.dim, lambda x: self.value(x) + c, self.grad,
                            self.laplacian, self.hessian, self.provenance, spec)

    def rho_function(self) -> SmoothFunction:
        """The volume density ``rho = e^{m u}`` with chain-rule derivatives."""
        m = self.dim

        def val(x):
            return np.exp(m * self.value(x))

        def grad(x):
            return m * val(x)[..., None] * self.grad(x)

        def hess(x):
            gu = self.grad(x)
            return m * val(x)[..., None, None] * (self.hessian(x) + m * gu[..., :, None] * gu[..., None, :])

        def lap(x):
            gu = self.grad(x)
            return m * val(x) * (self.laplacian(x) + m * (gu * gu).sum(-1))

        return SmoothFunction(m, val, grad, lap, hess, self.provenance)


# -- radial profiles -----------------------------------------------------------

@dataclass(frozen=True)
class RadialProfile:
    """``f(r)`` with ``f'(r)/r`` and ``f''(r)``, all regular at ``r = 0``."""

    f: Callable
    df_over_r: Callable
    d2f: Callable


def radial_field(m: int, profile: RadialProfile, center=None, scale: float = 1.0,
                 offset: float = 0.0, spec: Optional[dict] = None) -> DensityField:
    """``u(x) = offset + scale * f(|x - center|)`` with analytic derivatives."""
    c = np.zeros(m) if center is None else np.asarray(center, dtype=float)
    if c.shape != (m,):
        raise WrongDimension(f"center must have {m} components")

    def parts(x):
        y = np.asarray(x, dtype=float) - c
        r = np.sqrt((y * y).sum(-1))
        return y, r

    def val(x):
        _, r = parts(x)
        return offset + scale * profile.f(r)

    def grad(x):
        y, r = parts(x)
        return scale * profile.df_over_r(r)[..., None] * y

    def hess(x):
        y, r = parts(x)
        g = profile.df_over_r(r)
        safe = np.where(r > 0, r, 1.0)
        k = np.where(r > 0, (profile.d2f(r) - g) / safe**2, 0.0)
        eye = np.eye(m)
        return scale * (g[..., None, None] * eye + k[..., None, None] * y[..., :, None] * y[..., None, :])

    def lap(x):
        _, r = parts(x)
        return scale * (profile.d2f(r) + (m - 1) * profile.df_over_r(r))

    return DensityField(m, val, grad, lap, hess, ANALYTIC, spec or {})


def _smoothstep7(t):
    t = np.clip(t, 0.0, 1.0)
    return t**4 * (35 - 84 * t + 70 * t**2 - 20 * t**3)


def _smoothstep7_d1(t):
    t = np.clip(t, 0.0, 1.0)
    return 140 * t**3 * (1 - t) ** 3


def _smoothstep7_d2(t):
    t = np.clip(t, 0.0, 1.0)
    return 420 * t**2 * (1 - t) ** 2 * (1 - 2 * t)


def bump_profile(sigma: float, cut_start: Optional[float] = None,
                 cut_end: Optional[float] = None) -> RadialProfile:
    """Gaussian ``exp(-r^2 / 2 sigma^2)`` times a C^3 cutoff on ``[cut_start, cut_end]``."""
    r0 = 3.0 * sigma if cut_start is None else float(cut_start)
    r1 = 4.0 * sigma if cut_end is None else float(cut_end)
    if not 0 < r0 < r1:
        raise ValueError("cutoff needs 0 < cut_start < cut_end")
    w = r1 - r0
    s2 = sigma * sigma

    def chi(r):
        return 1.0 - _smoothstep7((r - r0) / w)

    def dchi(r):
        return -_smoothstep7_d1((r - r0) / w) / w

    def d2chi(r):
        return -_smoothstep7_d2((r - r0) / w) / w**2

    def g(r):
        return np.exp(-r * r / (2 * s2))

    def f(r):
        return g(r) * chi(r)

    def df_over_r(r):
        safe = np.where(r > 0, r, 1.0)
        return g(r) * (-chi(r) / s2 + np.where(r > 0, dchi(r) / safe, 0.0))

    def d2f(r):
        gr = g(r)
        return (r * r / s2**2 - 1 / s2) * gr * chi(r) + 2 * (-r / s2) * gr * dchi(r) + gr * d2chi(r)

    return RadialProfile(f, df_over_r, d2f)


SPHERE_PROFILE = RadialProfile(
    lambda r: -np.log1p(r * r / 4),
    lambda r: -0.5 / (1 + r * r / 4),
    lambda r: -0.5 * (1 - r * r / 4) / (1 + r * r / 4) ** 2,
)

HYPERBOLIC_PROFILE = RadialProfile(
    lambda r: -np.log1p(-r * r / 4),
    lambda r: 0.5 / (1 - r * r / 4),
    lambda r: 0.5 * (1 + r * r / 4) / (1 - r * r / 4) ** 2,
)

QUADRATIC_PROFILE = RadialProfile(
    lambda r: r * r,
    lambda r: 2.0 * np.ones_like(r),
    lambda r: 2.0 * np.ones_like(r),
)


# -- named constructors ----------------------------------------------------

def constant_field(m: int, c: float = 0.0) -> DensityField:
    c = float(c)
    return DensityField(
        m,
        lambda x: np.full(np.shape(x)[:-1], c),
        lambda x: np.zeros(np.shape(x)),
        lambda x: np.zeros(np.shape(x)[:-1]),
        lambda x: np.zeros(np.shape(x) + (m,)),
        ANALYTIC,
        {"kind": "constant", "dim": m, "value": c},
    )


def sphere_chart(m: int, center=None) -> DensityField:
    """Stereographic chart of the unit sphere: ``u = -log(1 + |x|^2/4)``, K = 1."""
    spec = {"kind": "sphere_chart", "dim": m}
    if center is not None:
        spec["center"] = [float(v) for v in center]
    return radial_field(m, SPHERE_PROFILE, center, spec=spec)


def hyperbolic_chart(m: int, center=None) -> DensityField:
    """Poincare-ball chart: ``u = -log(1 - |x|^2/4)`` on ``|x| < 2``, K = -1."""
    spec = {"kind": "hyperbolic_chart", "dim": m}
    if center is not None:
        spec["center"] = [float(v) for v in center]
    return radial_field(m, HYPERBOLIC_PROFILE, center, spec=spec)


def gaussian_bump(m: int, eps: float = 0.05, sigma: float = 0.15, center=None,
                  density_form: bool = True, cut_start: Optional[float] = None,
                  cut_end: Optional[float] = None) -> DensityField:
    """Smooth compactly supported bump.

    With ``density_form`` the volume density is ``rho = e^{eps phi}``, so
    ``u = (eps/m) phi``; otherwise ``u = eps phi``.
    """
    c = np.full(m, 0.5) if center is None else np.asarray(center, dtype=float)
    prof = bump_profile(sigma, cut_start, cut_end)
    scale = eps / m if density_form else eps
    spec = {"kind": "gaussian_bump", "dim": m, "eps": float(eps), "sigma": float(sigma),
            "center": [float(v) for v in c], "density_form": bool(density_form)}
    if cut_start is not None:
        spec["cut_start"] = float(cut_start)
    if cut_end is not None:
        spec["cut_end"] = float(cut_end)
    fld = radial_field(m, prof, c, scale, spec=spec)
    object.__setattr__(fld, "_phi", radial_field(m, prof, c))
    return fld


def bump_phi(fld: DensityField) -> DensityField:
    """The unscaled profile ``phi`` of a field built by :func:`gaussian_bump`."""
    return fld._phi  # type: ignore[attr-defined]


_PROFILES = {"gaussian": None, "sphere": SPHERE_PROFILE,
             "hyperbolic": HYPERBOLIC_PROFILE, "quadratic": QUADRATIC_PROFILE}


def field_from_config(cfg: dict) -> DensityField:
    """Build a field from its JSON description (see docs/config.md)."""
    try:
        kind = cfg["kind"]
        m = int(cfg["dim"])
    except KeyError as exc:
        raise ConfigError(f"field config missing {exc}") from exc
    shift = float(cfg.get("shift", 0.0))
    if kind == "constant":
        fld = constant_field(m, float(cfg.get("value", 0.0)))
    elif kind == "gaussian_bump":
        fld = gaussian_bump(m, float(cfg.get("eps", 0.05)), float(cfg.get("sigma", 0.15)),
                            cfg.get("center"), bool(cfg.get("density_form", True)),
                            cfg.get("cut_start"), cfg.get("cut_end"))
    elif kind == "sphere_chart":
        fld = sphere_chart(m, cfg.get("center"))
    elif kind == "hyperbolic_chart":
        fld = hyperbolic_chart(m, cfg.get("center"))
    elif kind == "radial":
        name = cfg.get("profile", "gaussian")
        if name not in _PROFILES:
            raise ConfigError(f"unknown radial profile {name!r}")
        prof = _PROFILES[name] or bump_profile(float(cfg.get("sigma", 0.15)),
                                               cfg.get("cut_start"), cfg.get("cut_end"))
        fld = radial_field(m, prof, cfg.get("center"), float(cfg.get("amplitude", 1.0)),
                           spec=dict(cfg))
    else:
        raise ConfigError(f"unknown field kind {kind!r}")
    if shift:
        fld = fld.shifted(shift)
    if cfg.get("finite_difference"):
        step = float(cfg.get("step", 1e-3))
        fd = fld.finite_difference(step)
        fld = DensityField(m, fd.value, fd.grad, fd.laplacian, fd.hessian, fd.provenance, fld.spec)
    return fld


def sphere_chart_distance(r):
    """Exact distance from the origin in the sphere chart."""
    return 2 * np.arctan(np.asarray(r) / 2)


def sphere_cap_area(rho):
    return 2 * math.pi * (1 - np.cos(rho))


def hyperbolic_disk_area(rho):
    return 2 * math.pi * (np.cosh(rho) - 1)
