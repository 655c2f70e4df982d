import math

import numpy as np
import pytest

from countcurv.directional import (SIX_PLANES, CurvatureOperator3, TubeSpec, build_slice,
                                   measure_tube, plane_frame, reconstruct_operator_3d,
                                   ricci_scalar_assembly, sectional_value, slice_gauss_oracle,
                                   slice_radius, tube_cells)
from countcurv.errors import EmptyTube
from countcurv.oracle.curvature import (curvature_operator_3d, gauss_curvature_2d,
                                        sectional_curvature)
from countcurv.oracle.fields import (DomainBox, constant_field, gaussian_bump, sphere_chart)
from countcurv.sampler import SampleSpec, sample_voronoi

FORMS = {"p23": (0.0, 1.0, -1.0), "p13": (1.0, 0.0, -1.0), "p12": (1.0, -1.0, 0.0)}


@pytest.fixture(scope="module")
def flat3():
    box = DomainBox.cube(3, 0, 1, 0.25)
    return sample_voronoi(SampleSpec(constant_field(3), box, 0.07, seed=11))


def central_cell(cx):
    return int(np.argmin(np.linalg.norm(cx.positions - 0.5, axis=1)))


# -- slices -----------------------------------------------------------------

def test_flat_slice_is_plane():
    sl = build_slice(constant_field(3), [0.5, 0.5, 0.5], "12", 0.2, 0.01)
    assert np.allclose(sl.cloud()[:, 2], 0.5, atol=1e-12)
    assert abs(slice_gauss_oracle(constant_field(3), sl)) < 1e-3


def test_plane_frames_reproduce_forms():
    for key, form in FORMS.items():
        X, Y, _ = plane_frame(key)
        assert np.dot(X, Y) == pytest.approx(0, abs=1e-12)
        w = np.cross(X, Y)  # components over (e2^e3, e3^e1, e1^e2)
        f = np.array(form) / np.linalg.norm(form)
        assert np.allclose(w, f)


def test_radial_symmetry():
    fld = gaussian_bump(3, eps=0.5, sigma=0.2, center=[0.5, 0.5, 0.5])
    sl = build_slice(fld, [0.5, 0.5, 0.5], "12", 0.2, 0.005, n_theta=64)
    rad = np.linalg.norm(sl.points - 0.5, axis=-1)
    assert np.ptp(rad, axis=1).max() < 1e-9
    assert np.allclose(sl.points[..., 2], 0.5, atol=1e-12)


def test_2d_oracle_matches_gauss():
    fld = sphere_chart(2)
    sl = build_slice(fld, [0.0, 0.0], "12", 0.3, 0.005)
    assert slice_gauss_oracle(fld, sl) == pytest.approx(float(gauss_curvature_2d(fld, [0, 0])),
                                                        rel=0.02)
    fld = gaussian_bump(2, eps=0.4, sigma=0.2, center=[0.5, 0.5])
    x = np.array([0.55, 0.48])
    sl = build_slice(fld, x, "12", 0.08, 0.002)
    assert slice_gauss_oracle(fld, sl) == pytest.approx(float(gauss_curvature_2d(fld, x)),
                                                        rel=0.02)


def test_3d_oracle_against_conformal_formula():
    fld = gaussian_bump(3, eps=0.4, sigma=0.2, center=[0.5, 0.5, 0.5])
    x = np.array([0.58, 0.5, 0.5])
    vals = {}
    for p in ("12", "23"):
        X, Y, _ = plane_frame(p)
        want = float(sectional_curvature(fld, x, X, Y))
        sl = build_slice(fld, x, p, 0.08, 0.002)
        vals[p] = slice_gauss_oracle(fld, sl)
        assert vals[p] == pytest.approx(want, rel=0.03, abs=0.02)
    assert abs(vals["12"] - vals["23"]) > 0.1


def test_sphere_chart_sectional():
    fld = sphere_chart(3)
    for p in ("13", "p12"):
        sl = build_slice(fld, [0.1, 0.0, -0.1], p, 0.2, 0.004)
        assert slice_gauss_oracle(fld, sl) == pytest.approx(1.0, rel=0.02)


# -- tubes ------------------------------------------------------------------

def test_slice_radius_inverse():
    spec = TubeSpec(1.5, 4, 0.1)
    mass = 2 * 1.5 * 0.1 * math.pi * (0.1 * 4) ** 2
    assert slice_radius(mass, spec) == pytest.approx(0.4)
    assert sectional_value(0.4, spec) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(EmptyTube):
        slice_radius(0.0, spec)


def test_tube_geometry(flat3):
    c = central_cell(flat3)
    fld = constant_field(3)
    a = flat3.mesh_scale
    base = flat3.positions[c]
    sl = build_slice(fld, base, "12", 0.4, a / 2)
    cells = tube_cells(flat3, fld, sl, TubeSpec(1.0, 3, a), c)
    dz = np.abs(flat3.positions[cells, 2] - base[2])
    assert dz.max() <= a * (1 + 1e-9)
    assert tube_cells(flat3, fld, sl, TubeSpec(1.0, 0, a), c).tolist() == [c]
    huge = tube_cells(flat3, fld, sl, TubeSpec(100.0, 2, a), c)
    assert huge.tolist() == np.flatnonzero(flat3.bfs(c, 2) >= 0).tolist()


def test_flat_tube_radius_scales_with_r(flat3):
    c = central_cell(flat3)
    fld = constant_field(3)
    a = flat3.mesh_scale
    sl = build_slice(fld, flat3.positions[c], "13", 0.7, a / 2)
    ratios = [measure_tube(flat3, fld, sl, TubeSpec(1.5, r, a), c).R_c / a - r for r in (2, 3, 4)]
    assert np.ptp(ratios) < 1.5


# -- assembly ---------------------------------------------------------------

def test_operator_constant_curvature():
    k = 0.7
    axis = {"12": k, "13": k, "23": k}
    pol = {"p23": k, "p13": k, "p12": k}
    lit = reconstruct_operator_3d(axis, pol, "literal").M
    assert np.allclose(np.diag(lit), k) and lit[1, 2] == pytest.approx(k / 2)
    ident = reconstruct_operator_3d(axis, pol).M
    assert np.allclose(ident, k * np.eye(3))
    assert np.array_equal(reconstruct_operator_3d({"12": 0, "13": 0, "23": 0},
                                                  {"p23": 0, "p13": 0, "p12": 0}).M, 0 * ident)


def test_operator_from_oracle_sectionals():
    fld = gaussian_bump(3, eps=0.5, sigma=0.2, center=[0.5, 0.5, 0.5])
    x = np.array([0.56, 0.47, 0.52])
    K = {p: float(sectional_curvature(fld, x, *plane_frame(p)[:2])) for p in SIX_PLANES}
    M = reconstruct_operator_3d({p: K[p] for p in ("12", "13", "23")},
                                {p: K[p] for p in ("p23", "p13", "p12")}).M
    assert np.allclose(M, curvature_operator_3d(fld, x), atol=1e-10)
    assert np.array_equal(M, M.T)


def test_operator_symmetry_enforced():
    with pytest.raises(ValueError):
        CurvatureOperator3(np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0.0]]))


def test_ricci_assembly():
    est = ricci_scalar_assembly(0.5, 0.5, 0.5)
    assert est.ric_diag == (1.0, 1.0, 1.0) and est.scalar == 3.0
    assert ricci_scalar_assembly(0, 0, 0).scalar == 0


def test_assembly_frame_invariance():
    fld = gaussian_bump(3, eps=0.5, sigma=0.2, center=[0.5, 0.5, 0.5])
    x = np.array([0.56, 0.47, 0.52])
    from scipy.spatial.transform import Rotation
    Q = Rotation.random(random_state=3).as_matrix()
    base = ricci_scalar_assembly(*(float(sectional_curvature(fld, x, *plane_frame(p)[:2]))
                                   for p in ("12", "13", "23"))).scalar
    rot = ricci_scalar_assembly(*(float(sectional_curvature(fld, x, *plane_frame(p, Q)[:2]))
                                  for p in ("12", "13", "23"))).scalar
    assert rot == pytest.approx(base, rel=1e-10)
