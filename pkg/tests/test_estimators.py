import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from countcurv.complex import build_complex, from_csr
from countcurv.errors import MissingMetadata, NonPositiveCount, WrongDimension
from countcurv.estimators import (EstimatorKind, FlatReference, admissible_r_max,
                                  continuum_limit, density_estimator, estimate_field,
                                  excess_radius, flat_reference, r_normalized_estimator,
                                  reconstructed_radius, unified_estimator)
from countcurv.lattice import (LatticeSpec, baseline_ball_count, baseline_sphere_count,
                               calibration_for, generate_l1_lattice)
from countcurv.oracle.fields import (DomainBox, constant_field, hyperbolic_disk_area,
                                     sphere_cap_area, sphere_chart)

L1 = {m: calibration_for("l1", m) for m in (1, 2, 3, 4)}
EU = {m: calibration_for("euclidean", m) for m in (1, 2, 3, 4)}


def test_reconstructed_radius_l1():
    r = 10
    count = 2 * r * r + 2 * r + 1
    assert reconstructed_radius(count, 2, L1[2]) == pytest.approx(math.sqrt(221 / 2))
    assert math.sqrt(221 / 2) == pytest.approx(10.512, abs=1e-3)


def test_reconstructed_radius_inverse():
    for r in (0.5, 3.0, 17.0):
        assert reconstructed_radius(math.pi * r * r, 2, EU[2]) == pytest.approx(r)
    with pytest.raises(NonPositiveCount):
        reconstructed_radius(0, 2, EU[2])


def test_unified_example():
    rc = reconstructed_radius(221, 2, L1[2])
    assert unified_estimator(10, rc, 2) == pytest.approx(3 * (100 - 110.5) / 1e4)
    assert unified_estimator(10, rc, 2) == pytest.approx(-3.15e-3, abs=1e-5)
    assert unified_estimator(7.0, 7.0, 3) == 0


def test_unified_perimeter_exact_zero():
    for r in range(1, 51):
        rc = reconstructed_radius(baseline_sphere_count(2, r), 1, L1[2])
        assert unified_estimator(r, rc, 1) == 0.0


@pytest.mark.parametrize("m", [2, 3, 4])
def test_unified_decay(m):
    vals = []
    for r in (10, 20, 40):
        rc = reconstructed_radius(baseline_ball_count(m, r), m, L1[m])
        vals.append(abs(unified_estimator(r, rc, m)))
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < vals[0] / 8


@settings(max_examples=200)
@given(st.floats(0.1, 100), st.floats(0.05, 200), st.integers(2, 4))
def test_r_normalized_identity(r, rc, m):
    got = r_normalized_estimator(r, rc, m)
    want = 6 * (m + 2) * (1 - (rc / r) ** m) / r**2
    assert got == pytest.approx(want, rel=1e-12, abs=1e-12 * abs(6 * (m + 2) / r**2))


@settings(max_examples=100)
@given(st.floats(0.5, 50), st.floats(0.01, 10), st.integers(2, 4))
def test_density_form_equals_r_normalized(r, scale, m):
    cal = EU[m]
    count = scale * cal.beta_m * r**m
    rho, val = density_estimator(count, r, m, cal.beta_m)
    rc = reconstructed_radius(count, m, cal)
    assert rho == pytest.approx(scale)
    assert val == pytest.approx(r_normalized_estimator(r, rc, m), rel=1e-9, abs=1e-9 / r**2)


def test_density_examples():
    for m in (2, 3, 4):
        b = EU[m].beta_m
        assert density_estimator(b * 5.0**m, 5.0, m, b)[1] == pytest.approx(0, abs=1e-14)
        assert density_estimator(b * 5.0**m / 2, 5.0, m, b)[1] == pytest.approx(3 * (m + 2) / 25)
        assert density_estimator(b * 5.0**m * 1.2, 5.0, m, b)[1] < 0


def test_dense_count_sign_follows_formula():
    # a denser-than-baseline count gives r_c > r, so delta r = r - r_c < 0
    cal = EU[2]
    r = 2.0
    rc = reconstructed_radius(1.1 * cal.beta_m * r * r, 2, cal)
    assert rc > r and excess_radius(r, rc) < 0


def test_excess_sphere_perimeter():
    r = 0.3
    L = 2 * math.pi * math.sin(r)
    dr = excess_radius(r, reconstructed_radius(L, 1, EU[2]))
    assert dr == pytest.approx(r - math.sin(r))
    assert dr == pytest.approx(4.48e-3, abs=1e-5)
    assert dr == pytest.approx(r**3 / 6, rel=0.02)


@pytest.mark.parametrize("area,K", [(sphere_cap_area, 1.0), (hyperbolic_disk_area, -1.0)])
def test_oracle_signs(area, K):
    for r in (0.05, 0.1, 0.2, 0.3):
        rc = reconstructed_radius(float(area(r)), 2, EU[2])
        val = r_normalized_estimator(r, rc, 2)
        assert np.sign(val) == np.sign(K)
        dr_per = r - (math.sin(r) if K > 0 else math.sinh(r))
        assert np.sign(dr_per) == np.sign(K)


def test_cap_area_identification():
    r = 0.2
    rc = reconstructed_radius(float(sphere_cap_area(r)), 2, EU[2])
    assert r_normalized_estimator(r, rc, 2) == pytest.approx(2.0, rel=0.15)


def test_small_circle_ratio():
    # delta r_per / delta r_area -> 4 on the unit sphere
    r = 0.02
    dper = r - math.sin(r)
    darea = r - math.sqrt(float(sphere_cap_area(r)) / math.pi)
    assert dper / darea == pytest.approx(4, rel=1e-3)
    assert darea / r**3 == pytest.approx(1 / 24, rel=1e-3)


def test_kind_validation():
    with pytest.raises(ValueError):
        EstimatorKind("bogus", 2)
    with pytest.raises(WrongDimension):
        EstimatorKind("r_normalized", 1)
    assert EstimatorKind("unified", 1).uses_sphere
    assert not EstimatorKind("unified", 2).uses_sphere


def test_continuum_limits():
    fld = sphere_chart(2)
    x = np.zeros(2)
    assert continuum_limit(EstimatorKind("unified", 1), fld, x) == pytest.approx(1.0)
    assert continuum_limit(EstimatorKind("unified", 2), fld, x) == pytest.approx(2 / 8)
    assert continuum_limit(EstimatorKind("r_normalized", 2), fld, x) == pytest.approx(2.0)
    assert math.isnan(continuum_limit(EstimatorKind("excess_area", 2), fld, x))


def lattice_with_scale(m, E, a=1.0):
    base = generate_l1_lattice(LatticeSpec(m, E))
    return from_csr(base.indptr, base.indices, positions=base.positions * a, mesh_scale=a,
                    validate=False)


def test_admissible_examples():
    E = 12
    cx = lattice_with_scale(2, E)
    K = DomainBox([-E, -E], [E, E])
    o = LatticeSpec(2, E).index_of((0, 0))
    assert admissible_r_max(cx, o, K, C=1).r_max == E - 1
    assert admissible_r_max(cx, o, K, C=3).r_max == E - 3
    edge = LatticeSpec(2, E).index_of((E, 0))
    rng = admissible_r_max(cx, edge, K, C=1)
    assert rng.r_max == 0 and rng.empty


def test_admissible_ten_steps():
    a = 0.1
    cx = lattice_with_scale(2, 30, a)
    K = DomainBox([-1.0, -3.0], [3.0, 3.0])
    o = LatticeSpec(2, 30).index_of((0, 0))
    assert admissible_r_max(cx, o, K, C=1).r_max == 9


def test_admissible_needs_metadata():
    with pytest.raises(MissingMetadata):
        admissible_r_max(build_complex([[1], [0]]), 0, DomainBox.cube(2, 0, 1))


def test_estimate_field_lattice():
    spec = LatticeSpec(2, 42)
    cx = generate_l1_lattice(spec)
    o = spec.index_of((0, 0))
    kind = EstimatorKind("unified", 2)
    recs = estimate_field(cx, None, kind, [o], list(range(5, 41)), L1[2])
    assert [r.r for r in recs] == list(range(5, 41))
    vals = np.abs([r.value for r in recs])
    assert np.all(np.diff(vals) < 0)
    for rec in recs:
        assert rec.raw_count == baseline_ball_count(2, rec.r)
        assert abs(rec.value) <= 6 / rec.r**3 * (1 + 1e-12)
    assert estimate_field(cx, None, kind, [], [5], L1[2]) == []


def test_estimate_field_order_and_threads():
    spec = LatticeSpec(3, 8)
    cx = generate_l1_lattice(spec)
    centers = [spec.index_of(p) for p in ((0, 0, 0), (1, 0, 0), (0, -1, 1))]
    kind = EstimatorKind("unified", 3)
    a = estimate_field(cx, None, kind, centers, [2, 4], L1[3], threads=1)
    b = estimate_field(cx, None, kind, centers, [2, 4], L1[3], threads=3)
    assert a == b
    assert [(r.center, r.r) for r in a] == [(c, r) for c in centers for r in (2, 4)]


def test_bad_radius_recorded():
    spec = LatticeSpec(2, 4)
    cx = generate_l1_lattice(spec)
    recs = estimate_field(cx, None, EstimatorKind("unified", 2), [0], [0, 1], L1[2])
    assert recs[0].error and recs[1].error is None


def test_flat_reference_on_lattice():
    spec = LatticeSpec(2, 20)
    cx = generate_l1_lattice(spec)
    o = spec.index_of((0, 0))
    ref = flat_reference(cx, [o, spec.index_of((1, 1))], 5, EU[2])
    assert ref.masses[3] == 25.0 and ref.spread[3] == 0.0
    assert ref.radius(3) == pytest.approx(math.sqrt(25 / math.pi))
    assert FlatReference.from_json(ref.to_json()) == ref


def test_ball_average():
    spec = LatticeSpec(2, 20)
    cx = generate_l1_lattice(spec)
    centers = [spec.index_of(p) for p in ((0, 0), (1, 0), (10, 0))]
    recs = estimate_field(cx, constant_field(2), EstimatorKind("r_normalized", 2), centers, [4],
                          EU[2], use_weights=False, average_radius=1)
    assert recs[0].averaged_value == pytest.approx((recs[0].value + recs[1].value) / 2)
    assert recs[2].averaged_value == recs[2].value
    assert all(r.oracle_value == 0 for r in recs)
