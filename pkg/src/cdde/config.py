"""Run configuration: JSON schemas with explicit defaults, loading and hashing."""

from __future__ import annotations

import copy
import hashlib
import json

from jsonschema import Draft7Validator, validators

NUM = {"type": "number"}
POS = {"type": "number", "exclusiveMinimum": 0}
INTERVAL = {"type": "array", "items": {"type": ["number", "string"]}, "minItems": 2, "maxItems": 2}
FIELD = {"oneOf": [{"type": "string"},
                   {"type": "object", "required": ["expr"],
                    "properties": {"dim": {"type": "integer", "minimum": 1},
                                   "expr": {}, "breakpoints": {"type": "array", "items": NUM},
                                   "regularity": {"type": "object"},
                                   "params": {"type": "object"}}}]}
MODULUS = {"oneOf": [{"type": "null"}, {"const": "m_bounds"},
                     {"type": "object", "required": ["type"],
                      "properties": {"type": {"enum": ["linear", "power", "table", "max", "holder"]}}}]}
KIND = {"enum": ["TB", "TD", "sigmaD", "TTheta", "sigmaTheta", "TThetaD", "sigmaThetaD",
                 "TThetaThetaHat", "sigmaThetaThetaHat", "TThetaB"]}
POINT = {"type": "array", "items": NUM, "minItems": 1}

RESOLUTION = {"type": "object", "default": {}, "additionalProperties": False,
              "properties": {"dt": {**POS, "default": 0.05}, "dx": {**POS, "default": 0.25}}}
SOLVER = {"type": "object", "default": {}, "additionalProperties": False,
          "properties": {"h": {**POS, "default": 1e-3},
                         "sub_steps": {"type": "integer", "minimum": 1, "default": 2},
                         "picard_tol": {**POS, "default": 1e-12},
                         "picard_max": {"type": "integer", "minimum": 1, "default": 50},
                         "escape_radius": {**POS, "default": 1e6},
                         "max_bisect": {"type": "integer", "minimum": 0, "default": 30},
                         "residual_factor": {**POS, "default": 5.0}}}
METRIC = {"type": "object", "default": {}, "required": ["kind"],
          "properties": {"kind": KIND,
                         "R": {"type": "integer", "minimum": 1, "default": 1},
                         "J": {"type": "integer", "minimum": 1, "default": 1},
                         "D": {"type": "array", "items": POINT, "default": []},
                         "p": {"type": "integer", "minimum": 1, "default": 1},
                         "K_max": {"type": ["integer", "null"], "minimum": 1, "default": None},
                         "theta": {**MODULUS, "default": None},
                         "theta_hat": {**MODULUS, "default": None},
                         "directions": {"type": "integer", "minimum": 1, "default": 16}}}
BOUND_RES = {"spatial_res": {**POS, "default": 0.1}, "time_res": {**POS, "default": 0.01}}

SCHEMAS = {
    "bounds": {
        "type": "object", "required": ["family"],
        "properties": {
            "family": {"type": "array", "items": FIELD, "minItems": 1},
            "kinds": {"type": "array", "items": {"enum": ["m", "l", "l1", "l2"]},
                      "default": ["m", "l", "l1", "l2"]},
            "j": {"type": "array", "items": POS, "default": [1]},
            "interval": {**INTERVAL, "default": [0, 1]},
            "r": {"type": "array", "items": POS, "default": [1]},
            "p": {"type": "integer", "minimum": 1, "default": 1},
            "eps": {"type": "array", "items": POS, "default": [0.1]},
            **BOUND_RES,
        },
    },
    "seminorm": {
        "type": "object", "required": ["field", "seminorms"],
        "properties": {
            "field": FIELD,
            "seminorms": {"type": "array", "minItems": 1, "items": {
                "type": "object", "required": ["kind"],
                "properties": {"kind": KIND, "I": {**INTERVAL, "default": [0, 1]},
                               "j": {**NUM, "default": 1}, "p": {"type": "integer", "minimum": 1, "default": 1},
                               "x_point": {"oneOf": [POINT, {"type": "null"}], "default": None},
                               "theta": {**MODULUS, "default": None},
                               "theta_hat": {**MODULUS, "default": None},
                               "directions": {"type": "integer", "minimum": 1, "default": 16},
                               "alternative": {"type": "boolean", "default": False}}}},
            "resolution": RESOLUTION,
            **BOUND_RES,
        },
    },
    "distance": {
        "type": "object", "required": ["f", "g", "metric"],
        "properties": {"f": FIELD, "g": FIELD, "metric": METRIC, "resolution": RESOLUTION, **BOUND_RES},
    },
    "solve": {
        "type": "object", "required": ["field"],
        "properties": {
            "field": FIELD,
            "history": {"oneOf": [{"type": "string"}, NUM,
                                  {"type": "object", "required": ["grid", "values"]}], "default": "1"},
            "history_derivative": {"type": ["string", "null"], "default": None},
            "T": {"type": "number", "minimum": 0, "default": 1.0},
            "solver": SOLVER,
        },
    },
    "hull": {
        "type": "object", "required": ["field", "times", "metric"],
        "properties": {"field": FIELD, "times": {"type": "array", "items": NUM, "minItems": 1},
                       "metric": METRIC, "resolution": RESOLUTION, **BOUND_RES},
    },
    "experiment": {
        "type": "object",
        "properties": {
            "scenario": {"type": "string"},
            "field": {"type": "string", "default": "0"},
            "limit": {"type": "string", "default": "0"},
            "dim": {"type": "integer", "minimum": 1, "default": 1},
            "history": {"type": ["string", "null"], "default": None},
            "history_limit": {"type": "string", "default": "1"},
            "history_derivative": {"type": ["string", "null"], "default": None},
            "history_limit_derivative": {"type": ["string", "null"], "default": None},
            "ns": {"type": "array", "items": {"type": "integer", "minimum": 1},
                   "default": [1, 2, 4, 8, 16, 32, 64, 128, 256]},
            "T": {"type": "number", "minimum": 0, "default": 1.0},
            "kind": {"oneOf": [KIND, {"type": "null"}], "default": None},
            "second_kind": {"oneOf": [KIND, {"type": "null"}], "default": None},
            "R": {"type": "integer", "minimum": 1, "default": 1},
            "J": {"type": "integer", "minimum": 1, "default": 1},
            "D": {"type": "array", "items": POINT, "default": [[1.0]]},
            "p": {"type": "integer", "minimum": 1, "default": 1},
            "theta": {**MODULUS, "default": "m_bounds"},
            "theta_hat": {**MODULUS, "default": None},
            "norm_interval": {"enum": ["full", "positive"], "default": "full"},
            "resolution": {**RESOLUTION, "properties": {"dt": {**POS, "default": 0.01},
                                                         "dx": {**POS, "default": 0.01}}},
            "solver": SOLVER,
            "bound_spatial_res": {**POS, "default": 0.1},
            "bound_time_res": {**POS, "default": 0.01},
            "directions": {"type": "integer", "minimum": 1, "default": 16},
            "hypotheses": {"type": "object", "default": {}},
            "threshold": {"type": ["number", "null"], "default": None},
            "params": {"type": "object", "additionalProperties": NUM, "default": {}},
        },
    },
    "selftest": {"type": "object", "properties": {}},
}
for _schema in SCHEMAS.values():
    _schema["additionalProperties"] = False


class ConfigError(ValueError):
    pass


def _with_defaults(cls):
    validate_props = cls.VALIDATORS["properties"]

    def set_defaults(validator, properties, instance, schema):
        if isinstance(instance, dict):
            for name, sub in properties.items():
                if "default" in sub and name not in instance:
                    instance[name] = copy.deepcopy(sub["default"])
        yield from validate_props(validator, properties, instance, schema)

    return validators.extend(cls, {"properties": set_defaults})


_Filling = _with_defaults(Draft7Validator)


def resolve(subcommand: str, raw: dict) -> dict:
    """Validate ``raw`` against the subcommand schema and fill every default."""
    if subcommand not in SCHEMAS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    cfg = copy.deepcopy(raw)
    errors = sorted(_Filling(SCHEMAS[subcommand]).iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {e.message}")
    return cfg


def load(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_hash(subcommand: str, cfg: dict, seed: int) -> str:
    return hashlib.sha256(canonical({"subcommand": subcommand, "config": cfg, "seed": seed})
                          .encode()).hexdigest()[:16]
