"""Run configuration: a YAML/JSON key-value tree with defaults, overrides and a digest."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .exceptions import DomainError, StructureError
from .group import HTypeGroupSpec, preset
from .operator import (
    CoefficientField,
    EllipticityBounds,
    constant_field,
    diagonal_ramp_field,
    identity_field,
    ratio_field,
    rotating_field,
)

DEFAULTS = {
    "group": {"preset": "heisenberg:1"},
    "field": {"kind": "identity"},
    "seed": 0,
    "output": None,
    "gauge": {"point": None},
    "constants": {"budget": 2_000_000, "K_samples": 20_000, "R_list": [0.5, 1.0, 2.0]},
    "landis": {"samples": 2048, "R": 1.0},
    "barrier": {
        "region": {"kind": "ball", "center": None, "radius": 0.5},
        "test": {"center": None, "radius": 0.25, "count": 12},
        "delta": None,
        "eps": None,
        "budget": 200_000,
        "tolerance": 0.1,
    },
    "harnack": {
        "resolution": 17,
        "pad": 2.0,
        "boundary": {"name": "sine"},
        "R": 1.0,
        "x0": None,
        "sweep": 0,
        "delta_min": 0.2,
        "csv": None,
    },
}


class ConfigError(StructureError):
    """Unparseable or inconsistent configuration; ``location`` names the offending key or file."""

    def __init__(self, message, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


def _merge(base: dict, extra: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        where = f"{path}.{key}" if path else key
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val, where)
        else:
            out[key] = val
    return out


def load_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(str(exc), str(path)) from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f"{path}:{mark.line + 1}" if mark is not None else f"{path}:{getattr(exc, 'lineno', '?')}"
        raise ConfigError(f"parse error: {exc}", loc) from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", str(path))
    return data


def parse_override(item: str) -> dict:
    """``a.b.c=value`` into a nested dict; the value is read as YAML."""
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {item!r} is not of the form key=value", "--set")
    try:
        val = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"bad value in {item!r}: {exc}", "--set") from exc
    out = val
    for part in reversed(key.split(".")):
        out = {part: out}
    return out


@dataclass
class RunConfig:
    tree: dict

    @classmethod
    def build(cls, path=None, overrides=()) -> "RunConfig":
        tree = copy.deepcopy(DEFAULTS)
        if path is not None:
            tree = _merge(tree, load_file(path))
        for item in overrides:
            tree = _merge(tree, item if isinstance(item, dict) else parse_override(item))
        return cls(tree)

    def __getitem__(self, key):
        return self.tree[key]

    @property
    def seed(self) -> int:
        try:
            return int(self.tree["seed"])
        except (TypeError, ValueError) as exc:
            raise ConfigError("seed must be an integer", "seed") from exc

    def canonical(self) -> str:
        return json.dumps(self.tree, sort_keys=True, separators=(",", ":"), default=_jsonable)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def group(self) -> HTypeGroupSpec:
        return group_from_config(self.tree.get("group") or {})

    def field(self, spec: HTypeGroupSpec) -> CoefficientField:
        return field_from_config(self.tree.get("field") or {}, spec)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def group_from_config(block: dict) -> HTypeGroupSpec:
    """``{preset: name}``, ``{file: path}`` or an inline ``{m, n, B, rescale}`` mapping."""
    if not isinstance(block, dict):
        raise ConfigError("group block must be a mapping", "group")
    if "file" in block:
        data = load_file(block["file"])
        block = data.get("group", data)
    if "preset" in block and "B" not in block:
        try:
            return preset(str(block["preset"]))
        except StructureError as exc:
            raise ConfigError(str(exc), "group.preset") from exc
    try:
        m, n = int(block["m"]), int(block["n"])
        B = np.asarray(block["B"], dtype=float)
    except KeyError as exc:
        raise ConfigError(f"missing key {exc.args[0]!r}", "group") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed entry: {exc}", "group.B") from exc
    if B.ndim == 2:
        B = B[None]
    rescale = block.get("rescale")
    try:
        return HTypeGroupSpec(m, n, B, rescale=None if rescale is None else np.asarray(rescale, dtype=float),
                              name=str(block.get("name", "custom")))
    except StructureError as exc:
        raise ConfigError(str(exc), "group") from exc


def field_from_config(block: dict, spec: HTypeGroupSpec) -> CoefficientField:
    """Coefficient field kinds: identity, constant, diagonal, diagonal_ramp, rotating, ratio."""
    kind = block.get("kind", "identity")
    m = spec.m
    try:
        if kind == "identity":
            return identity_field(m)
        if kind == "constant":
            return constant_field(block["matrix"])
        if kind == "diagonal":
            return constant_field(np.diag(np.asarray(block["diag"], dtype=float)))
        if kind == "diagonal_ramp":
            return diagonal_ramp_field(block["start"], block["end"], int(block.get("axis", 0)),
                                       float(block.get("lo", -1.0)), float(block.get("hi", 1.0)))
        if kind == "rotating":
            return rotating_field(block["diag"], float(block.get("rate", 1.0)), int(block.get("axis", 0)),
                                  tuple(block.get("plane", (0, 1))))
        if kind == "ratio":
            bounds = EllipticityBounds(float(block["lambda"]), float(block["Lambda"]))
            return ratio_field(m, bounds.lam, bounds.Lam, float(block.get("rate", 1.0)))
    except KeyError as exc:
        raise ConfigError(f"missing key {exc.args[0]!r}", f"field[{kind}]") from exc
    except DomainError:
        # a well-formed but non-elliptic field is a precondition failure, not a parse error
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), f"field[{kind}]") from exc
    raise ConfigError(f"unknown field kind {kind!r}", "field.kind")


def check_field_dimension(fld: CoefficientField, spec: HTypeGroupSpec):
    if fld.m != spec.m:
        raise ConfigError(f"field is {fld.m}x{fld.m} but the group has m={spec.m}", "field")
