"""Experiment configuration: TOML files validated against a JSON schema."""

from __future__ import annotations

import hashlib
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .groups import DEFAULT_ELEMENT_CAP, GroupSpec, TowerSpec, Word
from .hyperbolic import DISC, MODELS, ModelPoint, MoebiusMap
from .kernels import POLICIES, SeriesOptions
from .tower import default_grid

BUNDLED_DIR = Path(__file__).parent / "configs"

_number = {"type": "number"}
_pair = {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "required": ["group"],
    "additionalProperties": False,
    "properties": {
        "description": {"type": "string"},
        "group": {
            "type": "object",
            "required": ["model", "generators"],
            "additionalProperties": False,
            "properties": {
                "model": {"enum": list(MODELS)},
                "generators": {
                    "type": "array",
                    "items": {"type": "array", "items": _number, "minItems": 8, "maxItems": 8},
                },
                "asserted_free_discrete": {"type": "boolean"},
                "asserted_convergence_type": {"type": "boolean"},
            },
        },
        "tower": {
            "type": "object",
            "required": ["kind", "schedule"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["cyclic_powers", "abelian_mod"]},
                "schedule": {"type": "array", "items": {"type": "integer", "minimum": 1},
                             "minItems": 1},
                "top": {"enum": ["trivial", "commutator"]},
            },
        },
        "points": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "model": {"enum": list(MODELS)},
                "grid": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"n": {"type": "integer", "minimum": 1},
                                   "radius": {"type": "number", "exclusiveMinimum": 0,
                                              "exclusiveMaximum": 1}},
                },
                "list": {"type": "array", "items": _pair},
                "basepoint": _pair,
            },
        },
        "series": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_len": {"type": "integer", "minimum": 0},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "policy": {"enum": list(POLICIES)},
                "coset": {"type": "string"},
                "element_cap": {"type": "integer", "minimum": 1},
                "subgroup": {"enum": ["whole", "identity"]},
            },
        },
        "outputs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["format", "path"],
                "additionalProperties": False,
                "properties": {"format": {"enum": ["csv", "record"]}, "path": {"type": "string"}},
            },
        },
    },
}


class ConfigError(ValueError):
    """The configuration file is missing, unreadable or fails validation."""


@dataclass
class ExperimentConfig:
    path: Path
    sha256: str
    group: GroupSpec
    tower: TowerSpec | None
    grid: np.ndarray
    basepoint: ModelPoint
    series: SeriesOptions
    subgroup: str = "whole"
    outputs: list = field(default_factory=list)
    bundled: bool = False
    raw: dict = field(default_factory=dict)


def _matrix(entries, model) -> MoebiusMap:
    ar, ai, br, bi, cr, ci, dr, di = entries
    return MoebiusMap(complex(ar, ai), complex(br, bi), complex(cr, ci), complex(dr, di), model)


def parse_config(data: dict, path: Path, digest: str) -> ExperimentConfig:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: schema violation at {where}: {exc.message}") from None
    gsec = data["group"]
    try:
        group = GroupSpec(
            model=gsec["model"],
            generators=[_matrix(e, gsec["model"]) for e in gsec["generators"]],
            asserted_free_discrete=gsec.get("asserted_free_discrete", True),
            asserted_convergence_type=gsec.get("asserted_convergence_type", True),
        )
        tower = None
        if "tower" in data:
            tsec = data["tower"]
            tower = TowerSpec(tsec["kind"], tuple(tsec["schedule"]), tsec.get("top", "trivial"),
                              rank=group.rank)
        psec = data.get("points", {})
        pmodel = psec.get("model", DISC)
        if "list" in psec:
            pts = [ModelPoint(complex(*p), pmodel).coordinate for p in psec["list"]]
            grid = np.array(pts, dtype=complex)
            if pmodel != DISC:
                grid = (grid - 1j) / (grid + 1j)
        else:
            gr = psec.get("grid", {})
            grid = default_grid(gr.get("n", 5), gr.get("radius", 0.7))
        bp = psec.get("basepoint")
        basepoint = ModelPoint(complex(*bp) if bp else (0j if pmodel == DISC else 1j), pmodel)
        ssec = data.get("series", {})
        coset = Word.parse(ssec["coset"]) if "coset" in ssec else None
        series = SeriesOptions(
            max_len=ssec.get("max_len", 8),
            tol=ssec.get("tol", 1e-10),
            closure_policy=ssec.get("policy", "raw_ball"),
            coset=coset,
            element_cap=ssec.get("element_cap", DEFAULT_ELEMENT_CAP),
        )
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    outputs = []
    for out in data.get("outputs", []):
        p = Path(out["path"])
        if not p.is_absolute():
            p = path.parent / p
        if not p.parent.is_dir():
            raise ConfigError(f"{path}: output directory {p.parent} does not exist")
        outputs.append((out["format"], p))
    bundled = path.resolve().parent == BUNDLED_DIR.resolve()
    return ExperimentConfig(path, digest, group, tower, grid, basepoint, series,
                            ssec.get("subgroup", "whole"), outputs, bundled, data)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        bundled = BUNDLED_DIR / path.name
        if path.parent == Path(".") and bundled.is_file():
            path = bundled
        else:
            raise ConfigError(f"config file {path} does not exist")
    raw = path.read_bytes()
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: not valid TOML: {exc}") from None
    return parse_config(data, path, hashlib.sha256(raw).hexdigest())


def bundled_configs() -> list[Path]:
    return sorted(BUNDLED_DIR.glob("*.toml"))


def fmt17(x) -> str:
    """Full double precision, as used in machine-readable files."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")
