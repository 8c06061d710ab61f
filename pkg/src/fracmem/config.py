"""Experiment configuration: JSON file + ``--set key=value`` overrides.

Every key is optional; missing keys take the defaults in ``DEFAULTS``.
The defaults reproduce the 1D reference run (a=1, m=1, gamma=0.75, p=2,
sigma=1, L=64, N=512, dt=0.02, T=200, epsilon=1e-3).

The torus length L and horizon T are coupled: the solution must stay
localized well inside [-L/2, L/2) up to time T, otherwise periodic images
feed back into the decay rates.
"""

from __future__ import annotations

import copy
import hashlib
import json
import re
from pathlib import Path
from typing import Any

import jsonschema

MODES = ("simulate", "verify-lemmas", "sweep", "fit")

DEFAULTS: dict = {
    "mode": "simulate",
    "params": {"a": 1.0, "m": 1.0, "gamma": 0.75, "p": 2.0, "sigma": 1.0, "n": 1},
    "grid": {"L": 64.0, "N": 512},
    "solver": {
        "dt": 0.02,
        "T": 200.0,
        "epsilon": 1e-3,
        "corrector_passes": 1,
        "blowup_threshold": 1e3,
        "sample_every": 1,
        "checkpoint_every": 0,
        "max_history_values": 2**26,
    },
    "initial_data": "gaussian",
    "fit": {"window": None, "tolerance": 0.15, "input": None},
    "sweep": {"axes": {}},
    "verify": {
        "lemma21": {
            "pairs": [[1.0, 2.0], [2.0, 1.0]],
            "j": [0, 1],
            "k_over_sigma": [0.0, 0.5],
            "sigma": 1.0,
            "L": 64.0,
            "N": 256,
            "T": 20.0,
            "samples": 81,
            "bound": 10.0,
        },
        "lemma22": {"c": [0.5, 1.0, 2.0], "alpha": [0.5, 1.0, 2.0], "T": 1000.0, "per_decade": 512},
        "lemma23": {
            "c": [0.5, 1.0, 2.0],
            "beta": [0.5, 2.0],
            "gamma": [0.25, 0.5, 0.75],
            "T": 1000.0,
            "per_decade": 512,
            "inject_wrong_bound": False,
        },
        "gn": {
            "dims": [1, 2],
            "q": [4, 6],
            "sigma": [1.0, 1.5],
            "samples": 100,
            "N": {"1": 128, "2": 64},
            "kmax": {"1": 8, "2": 4},
            "refine_tol": 0.01,
            "scale_tol": 1e-12,
        },
    },
    "output": {"dir": "out", "figures": True},
    "seed": 0,
    "workers": 1,
}

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_numlist = {"type": "array", "items": _num}

SCHEMA: dict = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "mode": {"enum": list(MODES)},
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: _num for k in ("a", "m", "gamma", "p", "sigma", "n")},
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"L": _pos, "N": {"type": "integer", "minimum": 8}},
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dt": _pos,
                "T": _pos,
                "epsilon": {"type": "number", "minimum": 0},
                "corrector_passes": {"type": "integer", "minimum": 0},
                "blowup_threshold": _pos,
                "sample_every": {"type": "integer", "minimum": 1},
                "checkpoint_every": {"type": "integer", "minimum": 0},
                "max_history_values": {"type": "integer", "minimum": 1},
            },
        },
        "initial_data": {"enum": ["gaussian", "random"]},
        "fit": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "window": {"oneOf": [{"type": "null"}, {**_numlist, "minItems": 2, "maxItems": 2}]},
                "tolerance": _pos,
                "input": {"type": ["string", "null"]},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"axes": {"type": "object", "additionalProperties": {"type": "array"}}},
        },
        "verify": {"type": "object"},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "figures": {"type": "boolean"}},
        },
        "seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
    },
}


class ConfigError(ValueError):
    pass


def deep_merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key != "axes":
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _line_of(text: str, path) -> int | None:
    """Best-effort line number of the last key in ``path`` within ``text``."""
    keys = [p for p in path if isinstance(p, str)]
    if not keys:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(keys[-1]), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects KEY=VALUE, got {assignment!r}")
    key, value = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"--set {key}: {part!r} is not a section")
    node[parts[-1]] = parse_value(value)


def load_config(path=None, overrides=(), text: str | None = None) -> dict:
    """Read, merge with defaults, apply overrides and validate."""
    user: dict = {}
    source = "<defaults>"
    if path is not None:
        source = str(path)
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    if text is not None:
        try:
            user = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"{source}:1: top level must be a JSON object")
    for assignment in overrides:
        apply_override(user, assignment)
    try:
        jsonschema.validate(user, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        line = _line_of(text or "", list(exc.absolute_path)) if text else None
        loc = f"{source}:{line}" if line else source
        raise ConfigError(f"{loc}: {where}: {exc.message}") from exc
    return deep_merge(DEFAULTS, user)


def canonical_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


# execution settings that never change the numbers written
EXECUTION_KEYS = ("output", "workers")


def config_hash(cfg: dict) -> str:
    """sha256 of the result-determining part of ``cfg``."""
    relevant = {k: v for k, v in cfg.items() if k not in EXECUTION_KEYS}
    return hashlib.sha256(canonical_json(relevant).encode()).hexdigest()


def get_path(cfg: dict, dotted: str):
    node = cfg
    for part in dotted.split("."):
        node = node[part]
    return node


def resolve_axis(name: str) -> str:
    """Map a bare sweep axis name to its dotted config path."""
    if "." in name:
        return name
    for section in ("params", "solver", "grid"):
        if name in DEFAULTS[section]:
            return f"{section}.{name}"
    if name in ("initial_data", "seed"):
        return name
    raise ConfigError(f"unknown sweep axis {name!r}")


def set_path(cfg: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = cfg
    for part in parts[:-1]:
        node = node[part]
    node[parts[-1]] = value
