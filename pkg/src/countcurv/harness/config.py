"""Run configurations: one JSON document per experiment.

The schema is documented in ``docs/config.md`` and enforced with
``jsonschema``; semantic checks (file existence, dimension agreement)
follow the structural ones.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

import jsonschema

from ..errors import ConfigError
from ..lattice import CalibrationKind
from ..oracle.fields import DensityField, DomainBox, field_from_config

EXPERIMENTS = ("sample", "bump", "sectional", "audit", "flatness")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_VEC = {"type": "array", "items": _NUM, "minItems": 1, "maxItems": 4}

SCHEMA = {
    "type": "object",
    "required": ["experiment"],
    "additionalProperties": False,
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "seed": {"type": "integer", "minimum": 0},
        "field": {
            "type": "object",
            "required": ["kind", "dim"],
            "properties": {
                "kind": {"enum": ["constant", "gaussian_bump", "sphere_chart",
                                  "hyperbolic_chart", "radial"]},
                "dim": {"type": "integer", "minimum": 1, "maximum": 4},
            },
        },
        "box": {
            "type": "object",
            "required": ["lower", "upper"],
            "additionalProperties": False,
            "properties": {"lower": _VEC, "upper": _VEC,
                           "margin": {"type": "number", "minimum": 0}},
        },
        "sampler": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "h": {"oneOf": [_POS, {"type": "array", "items": _POS, "minItems": 1}]},
                "levels": {"type": "integer", "minimum": 1, "maximum": 8},
                "delta_qu": _POS,
                "Delta_qu": _POS,
                "candidates": {"type": "integer", "minimum": 1},
                "calibration_seed": {"type": "integer", "minimum": 0},
            },
        },
        "estimator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["unified", "r_normalized", "density_form",
                                  "excess_per", "excess_area"]},
                "calibration": {"enum": [k.value for k in CalibrationKind]},
                "average_radius": {"type": "integer", "minimum": 0},
                "flat_reference": {"type": "boolean"},
                "reference_centers": {"type": "integer", "minimum": 1},
            },
        },
        "radii": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "policy": {"enum": ["list", "sqrt"]},
                "values": {"type": "array", "items": {"type": "integer", "minimum": 1},
                           "minItems": 1},
                "factor": _POS,
                "sweep": {"type": "array", "items": {"type": "integer", "minimum": 1},
                          "minItems": 2, "maxItems": 2},
            },
        },
        "centers": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "count": {"type": "integer", "minimum": 1},
                "radius": _POS,
                "center": _VEC,
            },
        },
        "sectional": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tau": _POS,
                "planes": {"enum": ["axes", "axes+polarized"]},
                "normalization": {"enum": ["literal", "planar"]},
                "polarization": {"enum": ["identity", "literal"]},
                "min_tube_cells": {"type": "integer", "minimum": 1},
                "tube_reference_centers": {"type": "integer", "minimum": 1},
            },
        },
        "flatness": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dims": {"type": "array", "items": {"type": "integer", "minimum": 1,
                                                    "maximum": 4}, "minItems": 1},
                "r_max": {"type": "integer", "minimum": 1, "maximum": 200},
            },
        },
        "complex": {"type": "string"},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "prefix": {"type": "string"}},
        },
    },
}

DEFAULTS = {
    "seed": 0,
    "sampler": {"levels": 4, "delta_qu": 1.0, "Delta_qu": 1.5, "candidates": 30,
                "calibration_seed": 1000},
    "estimator": {"kind": "r_normalized", "calibration": "euclidean", "average_radius": 2,
                  "flat_reference": True, "reference_centers": 400},
    "radii": {"policy": "sqrt", "factor": 1.0},
    "centers": {"count": 40, "radius": 0.3},
    "sectional": {"tau": 1.5, "planes": "axes+polarized", "normalization": "planar",
                  "polarization": "identity", "min_tube_cells": 10,
                   "tube_reference_centers": 24},
    "flatness": {"dims": [1, 2, 3, 4], "r_max": 50},
    "output": {"dir": ".", "prefix": "run"},
}


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration with defaults filled in.

    ``raw`` keeps the document as given; the remaining attributes are the
    merged sections.
    """

    experiment: str
    seed: int
    field: Optional[dict]
    box: Optional[dict]
    sampler: dict
    estimator: dict
    radii: dict
    centers: dict
    sectional: dict
    flatness: dict
    output: dict
    complex: Optional[str] = None
    raw: dict = field(default_factory=dict, repr=False)

    def density_field(self) -> DensityField:
        if self.field is None:
            raise ConfigError("config has no field section")
        return field_from_config(self.field)

    def domain(self) -> DomainBox:
        if self.box is None:
            raise ConfigError("config has no box section")
        return DomainBox.from_json(self.box)

    def h_levels(self) -> list:
        """Mesh levels: an explicit list, or ``h, h/2, ...`` for ``levels`` halvings."""
        h = self.sampler.get("h")
        if h is None:
            raise ConfigError("sampler.h is required")
        if isinstance(h, list):
            return [float(v) for v in h]
        return [float(h) / 2**k for k in range(int(self.sampler["levels"]))]

    def to_json(self) -> dict:
        return json.loads(json.dumps(self.raw))


def _merge(section: str, given: dict) -> dict:
    out = dict(DEFAULTS.get(section, {}))
    out.update(given.get(section, {}))
    return out


def parse_config(doc: dict, base_dir: str = ".") -> RunConfig:
    """Validate ``doc`` and fill defaults; raises :class:`ConfigError`."""
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {path}: {exc.message}") from exc
    exp = doc["experiment"]
    if exp in ("sample", "bump", "sectional", "audit"):
        for key in ("field", "box"):
            if key not in doc:
                raise ConfigError(f"experiment {exp!r} needs a {key!r} section")
        if "h" not in doc.get("sampler", {}):
            raise ConfigError(f"experiment {exp!r} needs sampler.h")
    if "field" in doc and "box" in doc:
        b = doc["box"]
        if not len(b["lower"]) == len(b["upper"]) == int(doc["field"]["dim"]):
            raise ConfigError("box and field dimensions disagree")
        DomainBox.from_json(b)  # lower < upper
    if exp == "sectional" and int(doc["field"]["dim"]) != 3:
        raise ConfigError("sectional experiments need a 3D field")
    cplx = doc.get("complex")
    if cplx is not None:
        cplx = cplx if os.path.isabs(cplx) else os.path.join(base_dir, cplx)
        if not os.path.exists(cplx):
            raise ConfigError(f"referenced complex {cplx!r} does not exist")
    return RunConfig(
        experiment=exp,
        seed=int(doc.get("seed", DEFAULTS["seed"])),
        field=doc.get("field"),
        box=doc.get("box"),
        sampler=_merge("sampler", doc),
        estimator=_merge("estimator", doc),
        radii=_merge("radii", doc),
        centers=_merge("centers", doc),
        sectional=_merge("sectional", doc),
        flatness=_merge("flatness", doc),
        output=_merge("output", doc),
        complex=cplx,
        raw=doc,
    )


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return parse_config(doc, os.path.dirname(os.path.abspath(path)))
