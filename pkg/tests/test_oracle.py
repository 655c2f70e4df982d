import math

import numpy as np
import pytest
import sympy as sp
from scipy.integrate import quad

from countcurv.errors import (BallEscapesDomain, GridTooCoarse, NonPositiveDensity,
                              WrongDimension)
from countcurv.oracle.curvature import (curvature_operator_3d, density_scalar_curvature,
                                        gauss_curvature_2d, ricci_diagonal_3d,
                                        scalar_curvature, sectional_curvature)
from countcurv.oracle.eikonal import (ball_volume, circle_perimeter_2d, disk_measurements,
                                      geodesic_distance, small_ball_prediction)
from countcurv.oracle.fields import (DensityField, DomainBox, SmoothFunction, bump_phi,
                                     constant_field, field_from_config, gaussian_bump,
                                     hyperbolic_chart, sphere_cap_area, sphere_chart)


def sympy_field(expr, syms):
    """DensityField with derivatives from symbolic differentiation."""
    m = len(syms)
    f = sp.lambdify(syms, expr, "numpy")
    g = [sp.lambdify(syms, sp.diff(expr, s), "numpy") for s in syms]
    H = [[sp.lambdify(syms, sp.diff(expr, a, b), "numpy") for b in syms] for a in syms]

    def cols(x):
        x = np.asarray(x, float)
        return [x[..., k] for k in range(m)]

    def bc(v, x):
        return np.broadcast_to(np.asarray(v, float), np.shape(x)[:-1])

    return DensityField(
        m,
        lambda x: bc(f(*cols(x)), x),
        lambda x: np.stack([bc(gk(*cols(x)), x) for gk in g], -1),
        lambda x: sum(bc(H[k][k](*cols(x)), x) for k in range(m)),
        lambda x: np.stack([np.stack([bc(H[i][j](*cols(x)), x) for j in range(m)], -1)
                            for i in range(m)], -2),
    )


# -- analytic curvature ------------------------------------------------------

def test_constant_field_flat():
    for m in (2, 3, 4):
        x = np.full(m, 0.3)
        assert scalar_curvature(constant_field(m, 0.7), x) == 0
    assert gauss_curvature_2d(constant_field(2, -1.0), [0.1, 0.2]) == 0


def test_sphere_chart_unit_curvature():
    fld = sphere_chart(2)
    pts = np.random.default_rng(0).uniform(-1, 1, (20, 2))
    assert np.allclose(gauss_curvature_2d(fld, pts), 1.0, atol=1e-12)
    assert np.allclose(gauss_curvature_2d(hyperbolic_chart(2), pts * 0.5), -1.0, atol=1e-12)
    fld3 = sphere_chart(3)
    assert scalar_curvature(fld3, np.zeros(3)) == pytest.approx(6.0)


def test_sphere_chart_against_symbolic():
    x, y = sp.symbols("x y")
    ref = sympy_field(-sp.log(1 + (x**2 + y**2) / 4), (x, y))
    pts = np.random.default_rng(1).uniform(-1, 1, (30, 2))
    fld = sphere_chart(2)
    assert np.allclose(fld.u(pts), ref.u(pts))
    assert np.allclose(fld.grad_u(pts), ref.grad_u(pts))
    assert np.allclose(fld.hessian_u(pts), ref.hessian_u(pts))


def test_bump_peak_positive():
    fld = gaussian_bump(2, eps=0.05, sigma=0.15, center=[0.5, 0.5])
    assert gauss_curvature_2d(fld, [0.5, 0.5]) > 0


def test_conformal_identity_2d():
    fld = gaussian_bump(2, eps=0.3, sigma=0.2, center=[0.5, 0.5])
    pts = np.random.default_rng(2).uniform(0, 1, (100, 2))
    R = scalar_curvature(fld, pts)
    K = gauss_curvature_2d(fld, pts)
    assert np.allclose(R, 2 * K, rtol=0, atol=1e-12 * np.abs(K).max())
    Rd = density_scalar_curvature(fld.rho_function(), 2, pts)
    assert np.allclose(Rd, R, atol=1e-10 * np.abs(R).max())


@pytest.mark.parametrize("m", [2, 3, 4])
def test_density_form_matches_scalar(m):
    fld = gaussian_bump(m, eps=0.2, sigma=0.2, center=np.full(m, 0.5))
    pts = np.random.default_rng(m).uniform(0.2, 0.8, (50, m))
    R = scalar_curvature(fld, pts)
    Rd = density_scalar_curvature(fld.rho_function(), m, pts)
    assert np.allclose(Rd, R, atol=1e-10 * np.abs(R).max())


def test_m3_second_order_form():
    # u = (eps/3) phi: R = e^{-2u}(-(4/3) eps lap phi - (2/9) eps^2 |grad phi|^2)
    eps = 0.3
    fld = gaussian_bump(3, eps=eps, sigma=0.2, center=np.full(3, 0.5))
    phi = bump_phi(fld)
    pts = np.random.default_rng(4).uniform(0.3, 0.7, (20, 3))
    g = phi.grad_u(pts)
    want = np.exp(-2 * fld.u(pts)) * (-(4 / 3) * eps * phi.laplacian_u(pts)
                                      - (2 / 9) * eps**2 * (g * g).sum(-1))
    assert np.allclose(scalar_curvature(fld, pts), want, atol=1e-12)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_density_first_order(m):
    # rho = e^{eps phi}: R = -(2(m-1)/m) eps lap phi + O(eps^2)
    pts = np.random.default_rng(5).uniform(0.35, 0.65, (10, m))
    errs = []
    for eps in (1e-2, 5e-3):
        fld = gaussian_bump(m, eps=eps, sigma=0.2, center=np.full(m, 0.5))
        phi = bump_phi(fld)
        R = density_scalar_curvature(fld.rho_function(), m, pts)
        first = -(2 * (m - 1) / m) * eps * phi.laplacian_u(pts)
        errs.append(np.abs(R - first).max())
        assert np.abs(R - first).max() < 0.05 * np.abs(first).max()
    assert errs[1] < errs[0] / 3  # second-order remainder


def test_wrong_dimension_and_density():
    with pytest.raises(WrongDimension):
        gauss_curvature_2d(constant_field(3), np.zeros(3))
    with pytest.raises(WrongDimension):
        scalar_curvature(constant_field(1), np.zeros(1))
    neg = SmoothFunction.build(2, lambda x: -np.ones(np.shape(x)[:-1]))
    with pytest.raises(NonPositiveDensity):
        density_scalar_curvature(neg, 2, np.zeros(2))


def test_finite_difference_agrees():
    fld = gaussian_bump(2, eps=0.5, sigma=0.2, center=[0.5, 0.5])
    fd = fld.finite_difference(1e-3)
    assert fd.provenance.kind == "finite_difference"
    pts = np.random.default_rng(6).uniform(0.2, 0.8, (100, 2))
    g, gf = fld.grad_u(pts), fd.grad(pts)
    scale = np.abs(g).max()
    assert np.abs(g - gf).max() < 1e-4 * scale
    L, Lf = fld.laplacian_u(pts), fd.laplacian(pts)
    assert np.abs(L - Lf).max() < 1e-4 * np.abs(L).max()


def test_sectional_and_operator_sphere():
    fld = sphere_chart(3)
    x = np.array([0.2, -0.1, 0.3])
    e = np.eye(3)
    for i, j in ((0, 1), (0, 2), (1, 2)):
        assert sectional_curvature(fld, x, e[i], e[j]) == pytest.approx(1.0)
    M = curvature_operator_3d(fld, x)
    assert np.allclose(M, np.eye(3))
    assert np.allclose(ricci_diagonal_3d(fld, x), 2.0)


def test_gauge_scaling():
    fld = gaussian_bump(2, eps=0.3, sigma=0.2, center=[0.5, 0.5])
    c = 0.4
    x = np.array([0.55, 0.45])
    assert gauss_curvature_2d(fld.shifted(c), x) == pytest.approx(
        math.exp(-2 * c) * gauss_curvature_2d(fld, x))


def test_field_config_roundtrip():
    fld = gaussian_bump(2, 0.1, 0.2, [0.4, 0.6])
    again = field_from_config(fld.spec)
    pts = np.random.default_rng(7).uniform(0, 1, (10, 2))
    assert np.allclose(again.u(pts), fld.u(pts))


# -- eikonal -----------------------------------------------------------------

def test_euclidean_distance():
    box = DomainBox.cube(2, 0, 1)
    d = 0.01
    gf = geodesic_distance(constant_field(2), [0.3, 0.4], box, d)
    X = gf.nodes()
    exact = np.linalg.norm(X - [0.3, 0.4], axis=1)
    assert np.abs(gf.distance.ravel() - exact).max() <= 2 * d


def test_constant_gauge_distance():
    box = DomainBox.cube(2, 0, 1)
    d, c = 0.01, 0.5
    gf = geodesic_distance(constant_field(2, c), [0.5, 0.5], box, d)
    exact = math.exp(c) * np.linalg.norm(gf.nodes() - 0.5, axis=1)
    assert np.abs(gf.distance.ravel() - exact).max() <= 2 * math.exp(c) * d


def test_radial_ray_quadrature():
    # negative bump: no focusing, so radial rays from the centre minimize
    fld = gaussian_bump(2, eps=-0.5, sigma=0.2, center=[0.5, 0.5], density_form=False)
    box = DomainBox.cube(2, 0, 1)
    gf = geodesic_distance(fld, [0.5, 0.5], box, 0.004)
    for t in (0.1, 0.2, 0.35):
        for ang in (0.0, 0.7, 2.0):
            dvec = np.array([math.cos(ang), math.sin(ang)])
            want = quad(lambda s: float(fld.line_density((0.5 + s * dvec)[None])[0]), 0, t)[0]
            got = float(gf.interpolate((0.5 + t * dvec)[None])[0])
            assert got == pytest.approx(want, abs=3e-3)


def test_eikonal_lipschitz():
    fld = gaussian_bump(2, eps=1.0, sigma=0.2, center=[0.5, 0.5], density_form=False)
    gf = geodesic_distance(fld, [0.4, 0.5], DomainBox.cube(2, 0, 1), 0.01)
    T, L = gf.distance, gf.line_density
    for ax in (0, 1):
        dT = np.abs(np.diff(T, axis=ax))
        edge = 0.5 * (np.delete(L, -1, ax) + np.delete(L, 0, ax)) * gf.delta
        assert np.all(dT <= edge * 1.05 + 1e-12)


def test_grid_too_coarse():
    fld = gaussian_bump(2, eps=20.0, sigma=0.05, center=[0.5, 0.5], density_form=False)
    with pytest.raises(GridTooCoarse):
        geodesic_distance(fld, [0.5, 0.5], DomainBox.cube(2, 0, 1), 0.05)


def test_flat_ball_and_perimeter():
    fld = constant_field(2)
    assert ball_volume(fld, [0, 0], 1.0, 0.01) == pytest.approx(math.pi, rel=0.01)
    assert circle_perimeter_2d(fld, [0, 0], 0.5, 0.005) == pytest.approx(math.pi, rel=0.01)


def test_ball_escapes():
    with pytest.raises(BallEscapesDomain):
        ball_volume(constant_field(2), [0.5, 0.5], 0.8, 0.01, box=DomainBox.cube(2, 0, 1))


def test_sphere_cap_and_circle():
    fld = sphere_chart(2)
    per, area = disk_measurements(fld, [0.0, 0.0], [0.3], 1e-3)
    assert area[0] == pytest.approx(float(sphere_cap_area(0.3)), rel=0.01)
    assert per[0] == pytest.approx(2 * math.pi * math.sin(0.3), rel=0.01)


def test_perimeter_excess_law():
    fld = sphere_chart(2)
    radii = [0.1, 0.2, 0.3]
    per, _ = disk_measurements(fld, [0.0, 0.0], radii, 1e-3)
    for r, L in zip(radii, per):
        dr = r - L / (2 * math.pi)
        assert dr / r**3 == pytest.approx(1 / 6, rel=0.1)


def test_flat_ball_volume_3d():
    v = ball_volume(constant_field(3), [0, 0, 0], 0.5, 0.02)
    assert v == pytest.approx(4 / 3 * math.pi * 0.125, rel=0.02)


def test_small_ball_prediction():
    for m, c in ((2, 24), (3, 30), (4, 36)):
        om = math.pi ** (m / 2) / math.gamma(m / 2 + 1)
        r, R = 0.3, 2.0
        assert small_ball_prediction(m, r, R) == pytest.approx(om * r**m * (1 - R * r * r / c))
        assert small_ball_prediction(m, r, 0.0) == om * r**m
