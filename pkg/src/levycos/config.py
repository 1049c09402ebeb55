"""
JSON run configuration: schema, line-aware validation and object builders.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import jsonschema
import numpy as np

from . import models
from .bermudan import TERMS
from .cos import DEFAULT_L, DEFAULT_N
from .mc_oracle import SimConfig

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_num_or_list = {"oneOf": [_pos, {"type": "array", "items": _pos, "minItems": 1}]}

MODEL_KINDS = ("cev_merton", "cev_vg", "cev_like", "merton")
# parameters each model kind accepts besides kind, name, S0 and r
MODEL_KEYS = {
    "cev_merton": {"sigma0", "beta", "lambda", "m", "delta"},
    "cev_vg": {"sigma0", "beta", "kappa", "theta", "rho"},
    "cev_like": {"b0", "b1", "beta", "c0", "c1", "eps1", "eps2", "eps3", "eps4", "lambda", "m", "delta"},
    "merton": {"sigma0", "lambda", "m", "delta", "c0"},
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["model", "option"],
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": list(MODEL_KINDS)},
                "name": {"type": "string"},
                "S0": _pos,
                "r": _num,
                "sigma0": _pos,
                "beta": _num,
                "lambda": {"type": "number", "minimum": 0},
                "m": _num,
                "delta": _pos,
                "kappa": _pos,
                "theta": _num,
                "rho": _pos,
                "b0": _num,
                "b1": _num,
                "c0": {"type": "number", "minimum": 0},
                "c1": {"type": "number", "minimum": 0},
                "eps1": _num,
                "eps2": _num,
                "eps3": _num,
                "eps4": _num,
            },
        },
        "option": {
            "type": "object",
            "required": ["strikes", "maturity"],
            "additionalProperties": False,
            "properties": {
                "style": {
                    "oneOf": [
                        {"enum": ["european", "bermudan", "american"]},
                        {"type": "array", "minItems": 1, "uniqueItems": True,
                         "items": {"enum": ["european", "bermudan", "american"]}},
                    ]
                },
                "strikes": {"type": "array", "items": _pos, "minItems": 1},
                "strike_grid": {
                    "type": "object",
                    "required": ["start", "stop", "num"],
                    "additionalProperties": False,
                    "properties": {"start": _pos, "stop": _pos, "num": {"type": "integer", "minimum": 1}},
                },
                "maturity": _num_or_list,
                "num_dates": {"oneOf": [{"type": "integer", "minimum": 1},
                                        {"type": "array", "items": {"type": "integer", "minimum": 1},
                                         "minItems": 1}]},
                "exercise_dates": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                "richardson_d": {"type": "integer", "minimum": 0},
            },
            "not": {"required": ["num_dates", "exercise_dates"]},
        },
        "engine": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "order": {"type": "integer", "minimum": 0, "maximum": 2},
                "N": {"type": "integer", "minimum": 2},
                "L": _pos,
                "xbar": {"oneOf": [{"const": "spot"}, _num]},
                "terms": {"enum": list(TERMS)},
                "panel_width": _pos,
            },
        },
        "mc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "paths": {"type": "integer", "minimum": 1},
                "steps_per_year": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "basis_degree": {"type": "integer", "minimum": 0, "maximum": 8},
            },
        },
        "convergence": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "orders": {"type": "array", "items": {"type": "integer", "minimum": 0, "maximum": 2},
                           "minItems": 1},
                "t": {"type": "array", "items": _pos, "minItems": 2},
                "xi_max": _pos,
                "xi_points": {"type": "integer", "minimum": 2},
                "extrapolate": {"type": "boolean"},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "json"]}, "minItems": 1,
                            "uniqueItems": True},
            },
        },
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["command", "config", "rows", "summary"],
    "properties": {
        "command": {"enum": ["price", "validate", "convergence", "greeks"]},
        "config": CONFIG_SCHEMA,
        "rows": {"type": "array", "items": {"type": "object"}},
        "summary": {"type": "object"},
    },
}


class ConfigError(ValueError):
    """Invalid configuration; ``line`` points into the source text when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


# --------------------------------------------------------------------------- #
# locating JSON paths in the source text
# --------------------------------------------------------------------------- #

_WS = " \t\r\n"


def _skip(text: str, i: int) -> int:
    while i < len(text) and text[i] in _WS:
        i += 1
    return i


def locate_lines(text: str) -> dict:
    """Map every JSON path (tuple of keys/indices) to the 1-based line where its value starts."""
    dec = json.JSONDecoder()
    lines = {}

    def line_of(i):
        return text.count("\n", 0, i) + 1

    def walk(i, path):
        i = _skip(text, i)
        lines[path] = line_of(i)
        if text[i] == "{":
            i = _skip(text, i + 1)
            if text[i] == "}":
                return i + 1
            while True:
                key, i = dec.raw_decode(text, _skip(text, i))
                lines.setdefault(path + (key,), line_of(i))
                i = _skip(text, i)
                i = walk(i + 1, path + (key,))          # past ':'
                i = _skip(text, i)
                if text[i] == "}":
                    return i + 1
                i += 1                                   # past ','
        if text[i] == "[":
            i = _skip(text, i + 1)
            if text[i] == "]":
                return i + 1
            k = 0
            while True:
                i = walk(i, path + (k,))
                i = _skip(text, i)
                if text[i] == "]":
                    return i + 1
                i += 1
                k += 1
        _, end = dec.raw_decode(text, i)
        return end

    walk(0, ())
    return lines


def _line_for(lines: dict, path) -> int | None:
    path = tuple(path)
    while path not in lines and path:
        path = path[:-1]
    return lines.get(path)


def parse_config(text: str) -> dict:
    """Parse and validate a configuration; raises :class:`ConfigError` with a line number."""
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno) from None
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = locate_lines(text)
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {err.message}", _line_for(lines, err.absolute_path))
    _check_semantics(cfg, text)
    return cfg


def load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _check_semantics(cfg: dict, text: str) -> None:
    lines = None

    def fail(msg, path):
        nonlocal lines
        lines = lines or locate_lines(text)
        raise ConfigError(msg, _line_for(lines, path))

    spec = cfg["model"]
    for key in spec:
        if key not in ("kind", "name", "S0", "r") and key not in MODEL_KEYS[spec["kind"]]:
            fail(f"model kind {spec['kind']!r} does not take {key!r}", ("model", key))
    opt = cfg["option"]
    mats = _as_list(opt["maturity"])
    nd = opt.get("num_dates")
    if isinstance(nd, list) and len(nd) != len(mats):
        fail("num_dates must have one entry per maturity", ("option", "num_dates"))
    ex = opt.get("exercise_dates")
    if ex is not None:
        if len(mats) != 1:
            fail("exercise_dates needs a single maturity", ("option", "exercise_dates"))
        if np.any(np.diff(ex) <= 0) or not np.isclose(ex[-1], mats[0]):
            fail("exercise_dates must increase strictly and end at the maturity", ("option", "exercise_dates"))
    conv = cfg.get("convergence", {})
    if "t" in conv and np.any(np.diff(conv["t"]) <= 0):
        fail("convergence t grid must increase strictly", ("convergence", "t"))


# --------------------------------------------------------------------------- #
# builders
# --------------------------------------------------------------------------- #

def _as_list(v) -> list:
    return list(v) if isinstance(v, list) else [v]


def build_model(spec: dict) -> models.LocalLevyModel:
    p = dict(spec)
    kind = p.pop("kind")
    name = p.pop("name", None)
    spot = p.pop("S0", 1.0)
    r = p.pop("r", 0.05)
    rename = {"lambda": "lam"}
    kw = {rename.get(k, k): v for k, v in p.items()}
    extra = set(kw) - {rename.get(k, k) for k in MODEL_KEYS[kind]}
    if extra:
        raise ConfigError(f"model kind {kind!r} does not take {sorted(extra)}")
    if kind == "merton":
        if "sigma0" in kw:
            kw["sigma"] = kw.pop("sigma0")
        if "c0" in kw:
            kw["gamma"] = kw.pop("c0")
        model = models.constant_merton(r=r, spot=spot, **kw)
    else:
        model = getattr(models, kind)(r=r, spot=spot, **kw)
    if name:
        model = _renamed(model, name)
    return model


def _renamed(model, name):
    from dataclasses import replace
    return replace(model, name=name)


@dataclass(frozen=True)
class EngineSettings:
    order: int = 2
    N: int = DEFAULT_N
    L: float = DEFAULT_L
    xbar: float | None = None
    terms: str = "panels"
    panel_width: float = 0.5


def build_engine(spec: dict | None) -> EngineSettings:
    spec = dict(spec or {})
    xbar = spec.pop("xbar", "spot")
    return EngineSettings(xbar=None if xbar == "spot" else float(xbar), **spec)


def build_sim(spec: dict | None, threads: int = 1) -> SimConfig:
    spec = spec or {}
    return SimConfig(
        n_paths=spec.get("paths", 100_000),
        steps_per_year=spec.get("steps_per_year", 250),
        seed=spec.get("seed", 2012),
        basis_degree=spec.get("basis_degree", 4),
        threads=threads,
    )


def strikes_of(option: dict) -> list:
    ks = list(option["strikes"])
    grid = option.get("strike_grid")
    if grid:
        ks += list(np.linspace(grid["start"], grid["stop"], grid["num"]))
    return ks


def schedules_of(option: dict) -> list:
    """[(T, dates tuple or None)] with None meaning 'no exercise schedule given'."""
    mats = _as_list(option["maturity"])
    if "exercise_dates" in option:
        return [(mats[0], tuple(option["exercise_dates"]))]
    nd = option.get("num_dates")
    if nd is None:
        return [(T, None) for T in mats]
    nds = _as_list(nd) if isinstance(nd, list) else [nd] * len(mats)
    return [(T, tuple(T * np.arange(1, M + 1) / M)) for T, M in zip(mats, nds)]


def styles_of(option: dict) -> list:
    return _as_list(option.get("style", "bermudan"))
