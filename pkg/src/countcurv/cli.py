"""Command-line interface: ``countcurv <command> ...``.

Commands
--------
generate   write an l1 lattice complex
sample     sample a Voronoi complex from a run config
estimate   counts-only scalar estimates on a complex
sectional  tube-restricted sectional estimates on a 3D complex
audit      measure the H1..H5 constants
sweep      run the experiment named in a run config and write its report
report     rebuild the summary and gnuplot files from a records CSV
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .directional import (
    AXIS_PLANES,
    SIX_PLANES,
    TubeSpec,
    build_slice,
    measure_tube,
    sectional_value,
    slice_extent,
)
from .errors import ConfigError, CountCurvError
from .estimators import (
    EstimatorKind,
    FlatReference,
    admissible_r_max,
    estimate_field,
    flat_reference,
)
from .io import load_complex, save_complex
from .lattice import LatticeSpec, calibration_for, generate_l1_lattice
from .oracle.curvature import sectional_curvature
from .oracle.fields import DomainBox, field_from_config
from .sampler import SampleSpec, audit_hypotheses, sample_voronoi

EXIT_USAGE = 2
EXIT_FAILURE = 1


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def parse_radii(text: str) -> list:
    """``"2:40"`` (inclusive), ``"2:40:2"`` or ``"3,5,8"``."""
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) == 2:
                lo, hi, step = parts[0], parts[1], 1
            elif len(parts) == 3:
                lo, hi, step = parts
            else:
                raise ValueError
            if step < 1:
                raise ValueError
            out = list(range(lo, hi + 1, step))
        else:
            out = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad radii {text!r}; use lo:hi[:step] or a,b,c")
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("radii must be positive integers")
    return out


def parse_point(text: str) -> np.ndarray:
    try:
        return np.array([float(p) for p in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad point {text!r}; use x,y[,z]")


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc


def _field_from_file(path: str):
    """A bare field object, or a run config with a ``field`` section."""
    doc = _load_json(path)
    return field_from_config(doc["field"] if "field" in doc else doc)


def _bounding_box(cx) -> DomainBox:
    P = cx.positions
    return DomainBox(tuple(P.min(0)), tuple(P.max(0)))


def auto_centers(cx, radii: Sequence[int], limit: int = 16) -> list:
    """Cells whose largest requested ball stays inside the bounding box of the sites.

    The cell nearest the centroid comes first; the rest are strided over
    the admissible candidates in cell order.
    """
    if cx.positions is None:
        return [0]
    box = _bounding_box(cx)
    P = cx.positions
    a = cx.mesh_scale or 1.0
    need = max(radii)
    depth = box.distance_to_boundary(P)
    order = np.argsort(-depth, kind="stable")
    mid = int(np.argmin(((P - P.mean(0)) ** 2).sum(1)))
    cand = [mid] + [int(c) for c in np.flatnonzero(depth >= (need + 1) * a) if c != mid]
    if len(cand) > 4 * limit:
        idx = np.linspace(0, len(cand) - 1, 4 * limit).round().astype(int)
        cand = [cand[i] for i in idx]
    out = []
    for c in cand:
        if admissible_r_max(cx, c, box, C=1.0).r_max >= need:
            out.append(c)
        if len(out) == limit:
            break
    if not out:
        out = [int(order[0])]
    return out


# -- commands ------------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.lattice != "l1":
        raise ConfigError(f"unknown lattice {args.lattice!r}")
    cx = generate_l1_lattice(LatticeSpec(args.dim, args.extent, shape=args.shape))
    save_complex(cx, args.out, binary=None if args.format == "auto" else args.format == "binary")
    _log(f"wrote {cx.cell_count} cells to {args.out}")
    return 0


def _spec_from_config(cfg, h: float, seed: Optional[int] = None) -> SampleSpec:
    s = cfg.sampler
    return SampleSpec(cfg.density_field(), cfg.domain(), h,
                      seed=cfg.seed if seed is None else seed,
                      delta_qu=float(s["delta_qu"]), Delta_qu=float(s["Delta_qu"]),
                      candidates=int(s["candidates"]))


def cmd_sample(args) -> int:
    from .harness.config import load_config
    from .harness.report import write_json

    cfg = load_config(args.config)
    h = cfg.h_levels()[args.level]
    spec = _spec_from_config(cfg, h, args.seed)
    cx = sample_voronoi(spec)
    save_complex(cx, args.out)
    _log(f"sampled {cx.cell_count} cells at h={h:g} into {args.out}")
    if args.audit:
        rep = audit_hypotheses(cx, spec.field, spec.box.inner(), seed=spec.seed)
        write_json(rep, args.audit)
        _log(f"wrote hypothesis audit to {args.audit}")
    return 0


def _reference(path: str, radii, cal, limit: int) -> FlatReference:
    """A saved flat reference (JSON) or one measured on a flat complex file."""
    if path.endswith(".json"):
        ref = FlatReference.from_json(_load_json(path))
        if len(ref.masses) <= max(radii):
            raise ConfigError(f"reference {path} only covers r <= {len(ref.masses) - 1}")
        return ref
    flat = load_complex(path)
    return flat_reference(flat, auto_centers(flat, radii, 8 * limit), max(radii), cal)


def cmd_estimate(args) -> int:
    from .harness.report import report, write_csv

    cx = load_complex(args.complex)
    m = args.m or cx.dim or 1
    kind = EstimatorKind(args.kind, m)
    # sphere counts (m = 1) calibrate with the complex's own alpha_1
    cal = calibration_for(args.calibration, m if m > 1 else (cx.dim or 1))
    fld = _field_from_file(args.field) if args.field else None
    if args.centers == "auto":
        centers = auto_centers(cx, args.radii, args.max_centers)
    else:
        centers = [int(c) for c in args.centers.split(",")]
    ref = _reference(args.reference, args.radii, cal, args.max_centers) if args.reference else None
    recs = estimate_field(cx, fld, kind, centers, args.radii, cal, reference=ref,
                          average_radius=args.average_radius, threads=args.threads)
    if not recs:
        _log("no records produced")
        return EXIT_FAILURE
    write_csv(recs, args.out)
    if args.summary:
        out_dir = os.path.dirname(os.path.abspath(args.summary))
        prefix = os.path.basename(args.summary)
        prefix = prefix[:-len("_summary.json")] if prefix.endswith("_summary.json") else \
            os.path.splitext(prefix)[0]
        report(recs, None, out_dir, prefix)
    bad = sum(1 for r in recs if r.error)
    _log(f"wrote {len(recs)} records ({bad} with errors) to {args.out}")
    return 0


def cmd_sectional(args) -> int:
    from .harness.experiments import SectionalRecord
    from .harness.report import dumps_json, write_csv

    cx = load_complex(args.complex)
    if cx.dim != 3:
        raise ConfigError("sectional estimates need a 3D complex with positions")
    fld = _field_from_file(args.field)
    base = args.base
    _, center = cKDTree(cx.positions).query(base)
    center = int(center)
    x = cx.positions[center]
    planes = tuple(AXIS_PLANES) if args.planes == "axes" else SIX_PLANES
    a = cx.mesh_scale
    recs = []
    for r in args.radii:
        spec = TubeSpec(args.tau, r, a)
        try:
            ext = slice_extent(cx, fld, center, r)
        except CountCurvError as exc:
            for p in planes:
                recs.append(SectionalRecord("input", center, r, p, args.tau, a, 0, 0.0,
                                            math.nan, a * r, math.nan, math.nan, math.nan,
                                            math.nan, str(exc)))
            continue
        for p in planes:
            sl = build_slice(fld, x, p, ext, args.delta or a / 2)
            K_or = float(sectional_curvature(fld, x, *sl.frame))
            try:
                meas = measure_tube(cx, fld, sl, spec, center)
                if meas.cells < args.min_tube_cells:
                    raise CountCurvError(f"only {meas.cells} tube cells")
            except CountCurvError as exc:
                recs.append(SectionalRecord("input", center, r, p, args.tau, a, 0, 0.0, math.nan,
                                            a * r, math.nan, math.nan, K_or, math.nan, str(exc)))
                continue
            val = sectional_value(meas.R_c, spec, args.normalization)
            lit = sectional_value(meas.R_c, spec, "literal")
            recs.append(SectionalRecord("input", center, r, p, args.tau, a, meas.cells, meas.mass,
                                        meas.R_c, a * r, val, lit, K_or, abs(val - K_or)))
    write_csv(recs, args.out)
    ok = [s for s in recs if s.error is None and abs(s.oracle) > 1e-12]
    if ok:
        ratio = float(np.median([s.literal / s.oracle for s in ok]))
        _log(f"median literal/oracle ratio {ratio:.4g} (1 means no constant-factor discrepancy)")
    if args.summary:
        info = {"center": center, "base": x, "normalization": args.normalization,
                "records": len(recs), "failed": sum(1 for s in recs if s.error)}
        with open(args.summary, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dumps_json(info))
    _log(f"wrote {len(recs)} sectional records to {args.out}")
    return 0


def cmd_audit(args) -> int:
    from .harness.config import load_config
    from .harness.experiments import run_hypothesis_audit
    from .harness.report import write_json

    cfg = load_config(args.config)
    if args.complex:
        cx = load_complex(args.complex)
        rep = audit_hypotheses(cx, cfg.density_field(), cfg.domain().inner(), seed=cfg.seed,
                               n_centers=int(cfg.centers["count"]))
        write_json(rep, args.out)
    else:
        series = run_hypothesis_audit(cfg, log=_log)
        write_json(series, args.out)
        _log("stable across levels" if series.stable else "NOT stable across levels")
    _log(f"wrote {args.out}")
    return 0


def cmd_sweep(args) -> int:
    from .harness.config import load_config
    from .harness.experiments import (
        run_bump_experiment,
        run_flatness_suite,
        run_hypothesis_audit,
        run_sectional_experiment,
    )
    from .harness.report import report, write_csv, write_json

    cfg = load_config(args.config)
    out_dir = args.out_dir or cfg.output["dir"]
    prefix = args.prefix or cfg.output["prefix"]
    os.makedirs(out_dir, exist_ok=True)
    exp = cfg.experiment
    if exp == "flatness":
        rep = run_flatness_suite(tuple(cfg.flatness["dims"]), int(cfg.flatness["r_max"]))
        write_json(rep, os.path.join(out_dir, f"{prefix}_summary.json"))
        _log("flatness suite " + ("passed" if rep.passed else "FAILED"))
        return 0 if rep.passed else EXIT_FAILURE
    if exp == "bump":
        recs, fit = run_bump_experiment(cfg, log=_log)
        report(recs, fit, out_dir, prefix, extra={"config": cfg.to_json()})
    elif exp == "sectional":
        (srecs, vrecs), fit = run_sectional_experiment(cfg, log=_log)
        report(srecs, fit, out_dir, prefix, extra={"config": cfg.to_json()})
        write_csv(vrecs, os.path.join(out_dir, f"{prefix}_volumetric.csv"))
    elif exp == "audit":
        series = run_hypothesis_audit(cfg, log=_log)
        write_json(series, os.path.join(out_dir, f"{prefix}_hypotheses.json"))
    elif exp == "sample":
        for i, h in enumerate(cfg.h_levels()):
            cx = sample_voronoi(_spec_from_config(cfg, h))
            save_complex(cx, os.path.join(out_dir, f"{prefix}_level{i}.ccx"))
    _log(f"{exp} outputs written to {out_dir}")
    return 0


def cmd_report(args) -> int:
    from .harness.report import read_csv, report

    rows = read_csv(args.records)
    out_dir = args.out_dir or os.path.dirname(os.path.abspath(args.records))
    prefix = args.prefix or os.path.splitext(os.path.basename(args.records))[0] + "_report"
    report(rows, None, out_dir, prefix)
    _log(f"report written to {out_dir}/{prefix}_summary.json")
    return 0


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="countcurv", description="Counts-only curvature toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write an l1 lattice complex")
    g.add_argument("--lattice", default="l1")
    g.add_argument("--dim", type=int, required=True)
    g.add_argument("--extent", type=int, required=True)
    g.add_argument("--shape", choices=("cube", "l1_ball"), default="cube")
    g.add_argument("--format", choices=("auto", "text", "binary"), default="auto",
                   help="auto picks binary for .ccx and text otherwise")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("sample", help="sample a Voronoi complex from a run config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--level", type=int, default=0, help="index into the config's h levels")
    s.add_argument("--seed", type=int, default=None, help="override the config seed")
    s.add_argument("--audit", default=None, help="also write hypotheses.json here")
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("estimate", help="counts-only scalar estimates")
    e.add_argument("--complex", required=True)
    e.add_argument("--kind", required=True,
                   choices=("unified", "r_normalized", "density_form", "excess_per", "excess_area"))
    e.add_argument("--calibration", required=True, choices=("l1", "euclidean"))
    e.add_argument("--m", type=int, default=None,
                   help="count dimension (1 = sphere counts); defaults to the complex dimension")
    e.add_argument("--centers", default="auto", help="'auto' or comma-separated cell ids")
    e.add_argument("--max-centers", type=int, default=16)
    e.add_argument("--radii", type=parse_radii, required=True)
    e.add_argument("--field", default=None, help="field JSON for oracle values")
    e.add_argument("--reference", default=None,
                   help="flat reference: a saved JSON or a flat complex to measure it on")
    e.add_argument("--average-radius", type=int, default=None)
    e.add_argument("--threads", type=int, default=None)
    e.add_argument("--summary", default=None, help="also write a JSON summary and .dat file")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_estimate)

    c = sub.add_parser("sectional", help="tube-restricted sectional estimates (3D)")
    c.add_argument("--complex", required=True)
    c.add_argument("--field", required=True)
    c.add_argument("--base", type=parse_point, required=True)
    c.add_argument("--planes", choices=("axes", "axes+polarized"), default="axes+polarized")
    c.add_argument("--tau", type=float, default=1.5)
    c.add_argument("--radii", type=parse_radii, required=True)
    c.add_argument("--normalization", choices=("literal", "planar"), default="literal")
    c.add_argument("--min-tube-cells", type=int, default=10)
    c.add_argument("--delta", type=float, default=None, help="slice step (default a/2)")
    c.add_argument("--summary", default=None)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_sectional)

    a = sub.add_parser("audit", help="H1..H5 constants")
    a.add_argument("--config", required=True)
    a.add_argument("--complex", default=None, help="audit this complex instead of sampling")
    a.add_argument("--out", default="hypotheses.json")
    a.set_defaults(func=cmd_audit)

    w = sub.add_parser("sweep", help="run the experiment named in a config")
    w.add_argument("--config", required=True)
    w.add_argument("--out-dir", default=None)
    w.add_argument("--prefix", default=None)
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="summarize a records CSV")
    r.add_argument("--records", required=True)
    r.add_argument("--out-dir", default=None)
    r.add_argument("--prefix", default=None)
    r.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args) or 0)
    except (CountCurvError, OSError) as exc:
        _log(f"countcurv {args.command}: error: {exc}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
