"""Experiment configuration: YAML files validated against a strict schema.

Every experiment has a complete default configuration; user files override
individual keys and unknown keys are rejected.  A run's manifest embeds the
resolved configuration under ``config:``, and ``load_config`` accepts either
a plain config file or a manifest, so a run can be reproduced directly from
the manifest it wrote.
"""

from __future__ import annotations

import copy

import yaml


class ConfigError(ValueError):
    pass


_SOLVER_SCHEMA = {
    "max_iter": (int, 100),
    "grad_tol": (float, 0.0),
    "restart": (bool, True),
    "warm_start": (bool, True),
}

SCHEMAS = {
    "deblur": {
        "experiment": (str, "deblur"),
        "seed": (int, 1000),
        "out": (str, "runs/deblur"),
        "problem": {
            "n": (int, 128),
            "gamma": (float, 0.02),
            "lambda_true": (float, 1000.0),
            "noise_seed": (int, 90),
        },
        "sampler": {
            "n_samples": (int, 10000),
            "lam": (float, 1000.0),
            "delta": (float, 150.0),
            "thin": (int, 10),
            "level": (float, 0.95),
        },
        "solver": _SOLVER_SCHEMA,
        "modes": (list, ["unconstrained", "nonnegative", "box", "box_euclidean"]),
    },
    "ct": {
        "experiment": (str, "ct"),
        "seed": (int, 2000),
        "out": (str, "runs/ct"),
        "problem": {
            "side": (int, 32),
            "n_angles": (int, 45),
            "n_rays": (int, 45),
            "lambda_true": (float, 5.0),
            "noise_seed": (int, 91),
        },
        "sampler": {
            "n_samples": (int, 5000),
            "burn_in": (int, 1000),
            "thin": (int, 10),
            "level": (float, 0.95),
            "alpha_lambda": (float, 1.0),
            "beta_lambda": (float, 1e-4),
            "alpha_delta": (float, 1.0),
            "beta_delta": (float, 1e-4),
        },
        "solver": _SOLVER_SCHEMA,
        "modes": (list, ["unconstrained", "nonnegative"]),
    },
    "density": {
        "experiment": (str, "density"),
        "seed": (int, 3000),
        "out": (str, "runs/density"),
        "gaussian": {
            "mean": (list, [0.3, 0.4]),
            "cov": (list, [[0.6, 0.2], [0.2, 0.5]]),
        },
        "tables": {"n_points": (int, 200)},
        "mc": {"n_samples": (int, 100000)},
        "solver": _SOLVER_SCHEMA,
    },
    "verify": {
        "experiment": (str, "verify"),
        "seed": (int, 20260810),
        "out": (str, "runs/verify"),
        "n_samples": (int, 50000),
        "tamper": (bool, False),
    },
}

DEBLUR_MODES = ("unconstrained", "nonnegative", "box", "box_euclidean")
CT_MODES = ("unconstrained", "nonnegative")

FULL_SCALE_CT = {
    "problem": {"side": 100, "n_angles": 180, "n_rays": 140},
    "sampler": {"n_samples": 15000, "burn_in": 1000},
}


def _coerce(value, typ, path):
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return int(value)
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        return value
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if typ is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return copy.deepcopy(value)
    raise ConfigError(f"{path}: unsupported schema type {typ!r}")


def _normalize(user, schema, path=""):
    if not isinstance(user, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping")
    unknown = set(user) - set(schema)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} under '{path or 'top level'}'")
    out = {}
    for key, spec in schema.items():
        sub_path = f"{path}.{key}" if path else key
        if isinstance(spec, dict):
            out[key] = _normalize(user.get(key, {}), spec, sub_path)
        else:
            typ, default = spec
            if key in user:
                out[key] = _coerce(user[key], typ, sub_path)
            else:
                out[key] = copy.deepcopy(default)
    return out


def _check_semantics(cfg):
    exp = cfg["experiment"]
    if exp == "deblur":
        bad = set(cfg["modes"]) - set(DEBLUR_MODES)
        if bad:
            raise ConfigError(f"unknown deblur mode(s) {sorted(bad)}")
        if not cfg["modes"]:
            raise ConfigError("at least one mode is required")
    if exp == "ct":
        bad = set(cfg["modes"]) - set(CT_MODES)
        if bad:
            raise ConfigError(f"unknown ct mode(s) {sorted(bad)}")
        if cfg["sampler"]["burn_in"] >= cfg["sampler"]["n_samples"]:
            raise ConfigError("burn_in must be smaller than n_samples")
    if exp == "density":
        mean = cfg["gaussian"]["mean"]
        cov = cfg["gaussian"]["cov"]
        if len(mean) != 2 or len(cov) != 2 or any(len(r) != 2 for r in cov):
            raise ConfigError("density experiment requires a planar gaussian")
    return cfg


def normalize_config(user):
    """Validate a raw mapping against its experiment schema."""
    if not isinstance(user, dict):
        raise ConfigError("config root must be a mapping")
    exp = user.get("experiment")
    if exp not in SCHEMAS:
        raise ConfigError(
            f"experiment must be one of {sorted(SCHEMAS)}, got {exp!r}")
    return _check_semantics(_normalize(user, SCHEMAS[exp]))


def default_config(experiment):
    if experiment not in SCHEMAS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    return normalize_config({"experiment": experiment})


def load_config(path):
    """Load a config file; manifests are unwrapped to their embedded config."""
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raise ConfigError(f"{path}: empty config")
    if isinstance(raw, dict) and "config" in raw and "experiment" not in raw:
        raw = raw["config"]
    return normalize_config(raw)


def dump_config(cfg):
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=False)


def apply_full_scale(cfg):
    if cfg["experiment"] != "ct":
        raise ConfigError("--full-scale only applies to the ct experiment")
    out = copy.deepcopy(cfg)
    for section, values in FULL_SCALE_CT.items():
        out[section].update(values)
    return out
