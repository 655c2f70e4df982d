import csv
import json
import math

import numpy as np
import pytest

from countcurv.cli import main, parse_radii
from countcurv.errors import ConfigError, NothingToReport
from countcurv.harness import (load_config, parse_config, run_bump_experiment,
                               run_hypothesis_audit)
from countcurv.harness.experiments import (policy_radius, probe_points, run_flatness_suite,
                                           sweep_radii)
from countcurv.harness.fit import envelope_constant, fit_two_term, loglog_slope
from countcurv.harness.report import (ESTIMATE_COLUMNS, SWEEP_COLUMNS, fmt, read_csv,
                                      report, write_csv)


def small_bump(eps=0.05, levels=2, seed=3):
    return {
        "experiment": "bump",
        "seed": seed,
        "field": {"kind": "gaussian_bump", "dim": 2, "eps": eps, "sigma": 0.15,
                  "center": [1.0, 1.0]},
        "box": {"lower": [0, 0], "upper": [2.0, 2.0], "margin": 0.12},
        "sampler": {"h": 0.05, "levels": levels},
        "centers": {"count": 8, "radius": 0.15},
    }


# -- config -----------------------------------------------------------------

def test_config_defaults():
    cfg = parse_config(small_bump())
    assert cfg.h_levels() == [0.05, 0.025]
    assert cfg.estimator["kind"] == "r_normalized"
    assert cfg.domain().dim == 2


@pytest.mark.parametrize("mutate,where", [
    (lambda d: d.pop("field"), "field"),
    (lambda d: d["sampler"].update(h=-1), "h"),
    (lambda d: d.update(bogus=1), "bogus"),
    (lambda d: d["box"].update(lower=[0, 0, 0]), "dimension"),
    (lambda d: d.update(experiment="nope"), "experiment"),
])
def test_config_errors(mutate, where):
    doc = small_bump()
    mutate(doc)
    with pytest.raises(ConfigError) as exc:
        parse_config(doc)
    assert where in str(exc.value)


def test_sectional_needs_3d():
    doc = small_bump()
    doc["experiment"] = "sectional"
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(small_bump()))
    assert load_config(p).seed == 3
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)


# -- helpers ----------------------------------------------------------------

def test_policy_and_sweep():
    assert policy_radius(0.025) == 6
    assert policy_radius(1.0) == 2
    rstar, radii = sweep_radii(parse_config(small_bump()), 0.025)
    assert rstar == 6 and radii[0] == 3 and radii[-1] == 9


def test_probe_points_deterministic():
    a = probe_points([0.5, 0.5], 0.2, 10)
    assert np.array_equal(a, probe_points([0.5, 0.5], 0.2, 10))
    assert np.array_equal(a[0], [0.5, 0.5])
    assert np.all(np.linalg.norm(a - 0.5, axis=1) <= 0.2 + 1e-12)


def test_parse_radii():
    assert parse_radii("2:5") == [2, 3, 4, 5]
    assert parse_radii("2:10:4") == [2, 6, 10]
    assert parse_radii("3,1,7") == [3, 1, 7]


# -- fits -------------------------------------------------------------------

def test_fit_recovers_constants():
    rng = np.random.default_rng(0)
    a = np.repeat([0.1, 0.05, 0.025], 20)
    R = rng.uniform(0.05, 0.5, a.size)
    err = 2.0 * a / R + 0.5 * R
    C1, C2, res = fit_two_term(a, R, err)
    assert C1 == pytest.approx(2.0) and C2 == pytest.approx(0.5)
    assert np.abs(res).max() < 1e-10
    assert loglog_slope([1, 2, 4], [1, 2 ** 0.5, 2.0]) == pytest.approx(0.5)
    assert 0.5 <= envelope_constant(a, R, err) <= 2.0


def test_fit_nonnegative():
    a = np.full(10, 0.1)
    R = np.linspace(0.1, 1, 10)
    C1, C2, _ = fit_two_term(a, R, 1.0 - R)
    assert C1 >= 0 and C2 >= 0


# -- report -----------------------------------------------------------------

def test_report_refuses_empty(tmp_path):
    with pytest.raises(NothingToReport):
        report([], out_dir=str(tmp_path))
    with pytest.raises(NothingToReport):
        write_csv([], tmp_path / "x.csv")


def test_fmt():
    assert fmt(None) == "" and fmt(float("nan")) == "nan" and fmt(-math.inf) == "-inf"
    assert fmt(0.1) == "0.1" and fmt(np.int64(3)) == "3" and fmt(True) == "true"


@pytest.fixture(scope="module")
def bump_run():
    return run_bump_experiment(parse_config(small_bump()))


def test_bump_run_and_report(bump_run, tmp_path):
    recs, fit = bump_run
    assert len(fit.levels) == 2 and math.isfinite(fit.slope)
    assert all(r.record.oracle_value is not None for r in recs if r.record.error is None)
    p1 = report(recs, fit, str(tmp_path / "a"), "bump")
    p2 = report(recs, fit, str(tmp_path / "b"), "bump")
    for k in p1:
        assert open(p1[k], "rb").read() == open(p2[k], "rb").read()
    with open(p1["csv"]) as fh:
        assert tuple(next(csv.reader(fh))) == SWEEP_COLUMNS
    summ = json.load(open(p1["summary"]))
    assert "slope" in summ["fit"] and "residuals" in summ["fit"]
    rows = read_csv(p1["csv"])
    assert len(rows) == len(recs)


def test_bump_first_order_terms(bump_run):
    recs, _ = bump_run
    ok = [r for r in recs if r.record.error is None]
    peak = max(ok, key=lambda r: r.neg_lap_phi)
    assert peak.neg_lap_phi > 0 and peak.first_order > 0
    # first order -(2(m-1)/m) eps lap phi with m = 2
    assert peak.first_order == pytest.approx(0.05 * peak.neg_lap_phi)
    assert peak.record.oracle_value == pytest.approx(peak.first_order, rel=0.1)


def test_flat_bump_small(tmp_path):
    recs, fit = run_bump_experiment(parse_config(small_bump(eps=0.0, levels=1)))
    ok = [r for r in recs if r.record.error is None]
    assert ok and all(r.record.oracle_value == 0 for r in ok)
    assert all(math.isfinite(r.record.value) for r in ok)
    assert fit.C1 >= 0 and fit.C2 >= 0


def test_flatness_suite_small():
    rep = run_flatness_suite(dims=(1, 2, 3), r_max=20, decay_radii=(5, 10, 20))
    assert rep.passed, rep.failures
    assert all(v == 0 for v in rep.unified1)


def test_audit_series():
    doc = small_bump()
    doc["experiment"] = "audit"
    series = run_hypothesis_audit(parse_config(doc))
    assert len(series.reports) == 2
    for rep in series.reports:
        assert rep.max_degree <= 64
        lo, hi = rep.weight_ratio_range
        assert 1 / rep.weight_lambda <= lo + 1e-12 and hi <= rep.weight_lambda + 1e-12


# -- CLI --------------------------------------------------------------------

def test_cli_generate_estimate(tmp_path):
    cx = tmp_path / "z2.ccx"
    assert main(["generate", "--dim", "2", "--extent", "30", "--out", str(cx)]) == 0
    out = tmp_path / "est.csv"
    assert main(["estimate", "--complex", str(cx), "--kind", "unified", "--calibration", "l1",
                 "--centers", "480", "--radii", "5:20", "--out", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == ESTIMATE_COLUMNS
    assert len(rows) == 16
    assert abs(float(rows[0]["value"])) < 6 / 125


def test_cli_errors(tmp_path, capsys):
    assert main(["estimate", "--complex", str(tmp_path / "missing"), "--kind", "unified",
                 "--calibration", "l1", "--radii", "1:3", "--out", str(tmp_path / "o")]) == 1
    with pytest.raises(SystemExit):
        main(["estimate", "--complex", "x", "--kind", "unified", "--radii", "1:3", "--out", "o"])


def test_cli_sample_and_report(tmp_path):
    cfgp = tmp_path / "c.json"
    doc = small_bump()
    doc["experiment"] = "sample"
    cfgp.write_text(json.dumps(doc))
    out = tmp_path / "v.ccx"
    assert main(["sample", "--config", str(cfgp), "--out", str(out),
                 "--audit", str(tmp_path / "h.json")]) == 0
    assert json.load(open(tmp_path / "h.json"))["max_degree"] > 0
    est = tmp_path / "e.csv"
    assert main(["estimate", "--complex", str(out), "--kind", "r_normalized",
                 "--calibration", "euclidean", "--radii", "2:4", "--reference", str(out),
                 "--field", str(cfgp), "--out", str(est)]) == 0
    assert main(["report", "--records", str(est), "--out-dir", str(tmp_path / "rep"),
                 "--prefix", "e"]) == 0
    assert (tmp_path / "rep" / "e_summary.json").exists()
