"""CSV tables, JSON summaries and gnuplot data files.

Output is byte-deterministic: floats are written with ``repr`` (shortest
round-trip form), JSON keys are sorted, non-finite numbers become ``null``
in JSON and ``nan``/``inf`` in CSV, and rows keep the order of the records.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, is_dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from ..errors import NothingToReport
from ..estimators import EstimateRecord
from .experiments import BumpRecord, SectionalRecord, VolumetricRecord
from .fit import RateFit

ESTIMATE_COLUMNS = ("center", "r", "a", "raw_count", "r_c", "rho", "value", "oracle", "abs_error")
SWEEP_COLUMNS = ("level", "h", "cells", "center", "r", "a", "radius", "raw_count", "r_c", "rho",
                 "value", "averaged", "oracle", "first_order", "abs_error", "error")
SECTIONAL_COLUMNS = ("complex", "center", "r", "plane", "tau", "a", "tube_cells", "tube_mass",
                     "R_c", "radius", "value", "literal", "oracle", "abs_error", "error")
VOLUMETRIC_COLUMNS = ("complex", "center", "r", "radius", "value", "assembly", "oracle", "error")


# -- formatting ----------------------------------------------------------------

def fmt(v) -> str:
    """Deterministic CSV cell text."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def clean_json(obj):
    """Convert numpy scalars, tuples and dataclasses; map non-finite floats to ``None``."""
    if is_dataclass(obj) and not isinstance(obj, type):
        obj = obj.to_json() if hasattr(obj, "to_json") else asdict(obj)
    if isinstance(obj, dict):
        return {str(k): clean_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean_json(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean_json(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps_json(obj) -> str:
    return json.dumps(clean_json(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_json(obj))


# -- rows ----------------------------------------------------------------------

def estimate_row(rec: EstimateRecord) -> dict:
    return {"center": rec.center, "r": rec.r, "a": rec.a, "raw_count": rec.raw_count,
            "r_c": rec.r_c, "rho": rec.rho, "value": rec.value, "oracle": rec.oracle_value,
            "abs_error": rec.abs_error}


def sweep_row(b: BumpRecord) -> dict:
    rec = b.record
    row = estimate_row(rec)
    row.update(level=b.level, h=b.h, cells=b.cells, radius=rec.radius,
               averaged=rec.averaged_value, first_order=b.first_order, error=rec.error)
    return row


def _dc_row(rec) -> dict:
    return asdict(rec)


def rows_for(records: Sequence) -> tuple:
    """``(columns, rows)`` for a homogeneous record list."""
    first = records[0]
    if isinstance(first, BumpRecord):
        return SWEEP_COLUMNS, [sweep_row(r) for r in records]
    if isinstance(first, EstimateRecord):
        return ESTIMATE_COLUMNS, [estimate_row(r) for r in records]
    if isinstance(first, SectionalRecord):
        return SECTIONAL_COLUMNS, [_dc_row(r) for r in records]
    if isinstance(first, VolumetricRecord):
        return VOLUMETRIC_COLUMNS, [_dc_row(r) for r in records]
    if isinstance(first, dict):
        return tuple(first), list(records)
    raise TypeError(f"cannot tabulate records of type {type(first).__name__}")


def csv_text(columns: Sequence[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(records: Sequence, path) -> None:
    if not records:
        raise NothingToReport("no records to write")
    cols, rows = rows_for(records)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(cols, rows))


def read_csv(path) -> list:
    """Rows of a report CSV as dicts of floats (ints where integral columns)."""
    ints = {"center", "r", "level", "cells", "tube_cells"}
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            conv = {}
            for k, v in row.items():
                if v == "":
                    conv[k] = None
                elif k in ints:
                    conv[k] = int(v)
                else:
                    try:
                        conv[k] = float(v)
                    except ValueError:
                        conv[k] = v
            out.append(conv)
    return out


# -- summaries -----------------------------------------------------------------

def error_table(rows: Sequence[dict]) -> list:
    """Median / max absolute error per ``(a, r)``, sorted by ``a`` descending then ``r``."""
    groups = {}
    for row in rows:
        e = row.get("abs_error")
        if e is None or not math.isfinite(float(e)):
            continue
        groups.setdefault((float(row["a"]), int(row["r"])), []).append(float(e))
    out = []
    for (a, r) in sorted(groups, key=lambda k: (-k[0], k[1])):
        v = np.array(groups[(a, r)])
        out.append({"a": a, "r": r, "count": int(v.size), "median": float(np.median(v)),
                    "max": float(v.max())})
    return out


def gnuplot_text(table: list, fit: Optional[RateFit]) -> str:
    """Two indexed blocks: error vs r per mesh level, then error vs h."""
    lines = ["# block 0: error vs r (one sub-block per mesh scale a)",
             "# a r count median_abs_error max_abs_error"]
    last = None
    for row in table:
        if last is not None and row["a"] != last:
            lines.append("")
        last = row["a"]
        lines.append(" ".join(fmt(row[k]) for k in ("a", "r", "count", "median", "max")))
    lines += ["", "", "# block 1: error vs h", "# h policy_r policy_error argmin_r min_error"]
    if fit is not None:
        for i, h in enumerate(fit.levels):
            lines.append(" ".join(fmt(v) for v in (h, fit.policy_r[i], fit.policy_error[i],
                                                    fit.argmin_r[i], fit.min_error[i])))
    return "\n".join(lines) + "\n"


def summary(records: Sequence, fit: Optional[RateFit], extra: Optional[dict] = None) -> dict:
    cols, rows = rows_for(records)
    table = error_table(rows) if "abs_error" in cols and "a" in cols else []
    errs = [float(r["abs_error"]) for r in rows
            if r.get("abs_error") is not None and math.isfinite(float(r["abs_error"]))]
    failed = sum(1 for r in rows if r.get("error"))
    out = {
        "records": len(rows),
        "failed_records": failed,
        "columns": list(cols),
        "median_abs_error": float(np.median(errs)) if errs else None,
        "max_abs_error": float(np.max(errs)) if errs else None,
        "error_by_a_r": table,
    }
    if fit is not None:
        out["fit"] = fit.to_json()
    if extra:
        out.update(extra)
    return out


def report(records: Sequence, fit: Optional[RateFit] = None, out_dir: str = ".",
           prefix: str = "run", extra: Optional[dict] = None) -> dict:
    """Write ``<prefix>.csv``, ``<prefix>_summary.json`` and ``<prefix>.dat``.

    Returns the written paths.  An empty record list is refused.
    """
    if not records:
        raise NothingToReport("refusing to report: the record list is empty")
    os.makedirs(out_dir, exist_ok=True)
    paths = {"csv": os.path.join(out_dir, f"{prefix}.csv"),
             "summary": os.path.join(out_dir, f"{prefix}_summary.json"),
             "dat": os.path.join(out_dir, f"{prefix}.dat")}
    write_csv(records, paths["csv"])
    summ = summary(records, fit, extra)
    write_json(summ, paths["summary"])
    with open(paths["dat"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(gnuplot_text(summ["error_by_a_r"], fit))
    return paths
