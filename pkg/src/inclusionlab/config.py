"""JSON run configuration: schema, defaults and builders."""

from __future__ import annotations

import copy
import json

import jsonschema
import numpy as np

from inclusionlab.exceptions import InvalidSpecError
from inclusionlab.forward import Inclusion, SolverControls
from inclusionlab.inverse import riccati_background
from inclusionlab.mesh import build_rectangle_mesh


class ConfigError(InvalidSpecError):
    """The configuration file is malformed or violates the schema."""


_NUM = {"type": "number"}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "domain": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"x0": _NUM, "x1": _NUM, "y0": _NUM, "y1": _NUM},
        },
        "mesh": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "nx": {"type": "integer", "minimum": 1},
                "ny": {"type": "integer", "minimum": 1},
            },
        },
        "source": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["constant", "manufactured", "riccati"]},
                "value": _NUM,
            },
        },
        "inclusions": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["center", "epsilon", "k"],
                "properties": {
                    "shape": {"enum": ["disk", "ellipse", "square"]},
                    "center": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                    "epsilon": {"type": "number", "exclusiveMinimum": 0},
                    "k": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                    "axes": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                             "minItems": 2, "maxItems": 2},
                },
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
            },
        },
        "study": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epsilons": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
            },
        },
        "experiments": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lambdas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                            "minItems": 1},
                "mode": {"enum": ["known-epsilon", "two-lambda"]},
                "synthesis": {"enum": ["forward", "manufactured"]},
                "m11_truth": _NUM,
                "noise": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "level": {"type": "number", "minimum": 0},
                        "seed": {"type": "integer"},
                    },
                },
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}

DEFAULTS = {
    "domain": {"x0": 0.0, "x1": 1.0, "y0": 0.0, "y1": 1.0},
    "mesh": {"nx": 64, "ny": None},
    "source": {"kind": "constant", "value": 1.0},
    "inclusions": [],
    "solver": {"tol": 1e-10, "max_iter": 50},
    "study": {"epsilons": []},
    "experiments": {
        "lambdas": [1.0, 2.0],
        "mode": "two-lambda",
        "synthesis": "forward",
        "m11_truth": 1.2,
        "noise": {"level": 0.0, "seed": 0},
    },
    "output": {"dir": "out"},
}


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _path(error) -> str:
    return "/".join(str(p) for p in error.absolute_path) or "<root>"


def resolve_config(raw: dict) -> dict:
    """Validate ``raw`` against :data:`SCHEMA` and fill in defaults."""
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config field '{_path(exc)}': {exc.message}") from None
    cfg = _merge(DEFAULTS, raw)
    if cfg["mesh"]["ny"] is None:
        cfg["mesh"]["ny"] = cfg["mesh"]["nx"]
    for inc in cfg["inclusions"]:
        inc.setdefault("shape", "disk")
        if inc["shape"] == "ellipse":
            inc.setdefault("axes", [1.0, 0.5])
    src = cfg["source"]
    if src["kind"] == "riccati":
        d = cfg["domain"]
        if (d["x0"], d["x1"]) != (0.0, 1.0):
            raise ConfigError("config field 'source/kind': the riccati source needs x in [0, 1]")
        src.setdefault("value", 0.5)
    if src["kind"] == "constant":
        src.setdefault("value", 1.0)
    return cfg


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return resolve_config(raw)


def build_grid(cfg: dict):
    d = cfg["domain"]
    return build_rectangle_mesh((d["x0"], d["x1"], d["y0"], d["y1"]), cfg["mesh"]["nx"], cfg["mesh"]["ny"])


def build_inclusions(cfg: dict) -> list:
    try:
        return [
            Inclusion(tuple(i["center"]), i["epsilon"], i["k"], i["shape"], tuple(i.get("axes", (1.0, 0.5))))
            for i in cfg["inclusions"]
        ]
    except InvalidSpecError as exc:
        raise ConfigError(f"config field 'inclusions': {exc}") from None


def build_controls(cfg: dict) -> SolverControls:
    return SolverControls(tol=cfg["solver"]["tol"], max_iter=cfg["solver"]["max_iter"])


def manufactured_solution(x, y):
    return np.cos(np.pi * x) + 2.0


def manufactured_source(x, y):
    return np.pi**2 * np.cos(np.pi * x) + manufactured_solution(x, y) ** 3


def build_source(cfg: dict, grid):
    """Nodal source values for the configured source kind."""
    src = cfg["source"]
    if src["kind"] == "constant":
        return np.full(grid.n_nodes, float(src["value"]))
    if src["kind"] == "manufactured":
        return manufactured_source(grid.nodes[:, 0], grid.nodes[:, 1])
    return riccati_background(grid, float(src["value"])).f_nodes
