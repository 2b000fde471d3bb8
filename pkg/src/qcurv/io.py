"""JSON interchange: profiles, manifold specs, scenarios and report writing.

Reports are written with a fixed key order and every float formatted to 17
significant digits, so identical inputs give byte-identical files.
Non-finite numbers and ``None`` ratio entries are written as ``"undefined"``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import catalog
from .cgb import ManifoldSpec
from .errors import DomainError, ScenarioError
from .radial_core import RadialProfile

TASKS = ("deficit", "ratios", "lemmas", "local", "manifold")

_PROFILE_REF = {
    "oneOf": [
        {
            "type": "object",
            "required": ["catalog"],
            "properties": {"catalog": {"type": "string"}, "params": {"type": "object"}},
            "additionalProperties": False,
        },
        {
            "type": "object",
            "required": ["mode", "t_min", "h", "values"],
            "properties": {
                "mode": {"const": "sampled"},
                "t_min": {"type": "number"},
                "t_max": {"type": "number"},
                "h": {"type": "number", "exclusiveMinimum": 0},
                "values": {"type": "array", "items": {"type": "number"}, "minItems": 8},
                "derivs": {
                    "type": "object",
                    "patternProperties": {
                        "^[1-4]$": {"type": "array", "items": {"type": "number"}}
                    },
                    "additionalProperties": False,
                },
                "name": {"type": "string"},
            },
            "additionalProperties": False,
        },
        {"type": "string"},
    ]
}

SCENARIO_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "catalog": {"type": "string"},
        "params": {"type": "object"},
        "profile": _PROFILE_REF,
        "qmeasure": {"type": "object"},
        "manifold": {
            "type": "object",
            "required": ["chi"],
            "properties": {
                "chi": {"type": "integer"},
                "weyl_energy": {"type": "number", "minimum": 0},
                "interior_q": {"type": "number"},
                "ends": {"type": "array", "items": _PROFILE_REF},
                "sings": {"type": "array", "items": _PROFILE_REF},
                "glue_radius": {"type": "number", "exclusiveMinimum": 0},
                "glued": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "integer"}, "minItems": 2,
                              "maxItems": 2},
                },
                "core_boundary_T": {"type": "array", "items": {"type": "number"}},
            },
            "additionalProperties": False,
        },
        "tasks": {"type": "array", "items": {"enum": list(TASKS)}, "uniqueItems": True},
        "chi": {"type": "integer"},
        "radii": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "t0": {"type": "array", "items": {"type": "number"}},
        "tolerances": {
            "type": "object",
            "additionalProperties": {"type": "number", "exclusiveMinimum": 0},
        },
        "t_window": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "quad_order": {"type": "integer", "minimum": 2},
    },
    "required": ["tasks"],
    "additionalProperties": False,
}


# --------------------------------------------------------------------------
# profiles
# --------------------------------------------------------------------------


def load_json(path: str | Path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path} is not valid JSON: {exc}") from None


def profile_from_json(obj: Any, base_dir: str | Path | None = None) -> RadialProfile:
    """Build a profile from a catalog reference, an inline sampled profile or a file path."""
    if isinstance(obj, str):
        path = Path(obj)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return profile_from_json(load_json(path), path.parent)
    if not isinstance(obj, dict):
        raise ScenarioError("profile must be an object or a path")
    if "catalog" in obj:
        return catalog.get(obj["catalog"], **obj.get("params", {})).profile
    if obj.get("mode") != "sampled":
        raise ScenarioError("inline profiles must be sampled; analytic ones are catalog references")
    values = np.asarray(obj["values"], dtype=float)
    h = float(obj["h"])
    t_min = float(obj["t_min"])
    if "t_max" in obj:
        t_max = t_min + h * (len(values) - 1)
        if not math.isclose(t_max, float(obj["t_max"]), rel_tol=0, abs_tol=1e-9 * max(1.0, abs(t_max))):
            raise ScenarioError(f"t_max {obj['t_max']} does not match t_min + h (n - 1) = {t_max}")
    derivs = {int(k): v for k, v in obj.get("derivs", {}).items()}
    return RadialProfile.sampled(values, t_min, h, derivs=derivs, name=obj.get("name", ""))


def profile_to_json(p: RadialProfile) -> dict:
    """Inverse of :func:`profile_from_json` (analytic profiles must come from the catalog)."""
    if p.mode == "sampled":
        out = {"mode": "sampled", "t_min": p.t_min, "t_max": p.t_max, "h": p.h,
               "values": p.values.tolist()}
        if p.node_derivs:
            out["derivs"] = {str(k): v.tolist() for k, v in sorted(p.node_derivs.items())}
        if p.name:
            out["name"] = p.name
        return out
    if p.name not in {e["id"] for e in catalog.list_catalog()}:
        raise DomainError("only catalog analytic profiles can be serialised")
    return {"catalog": p.name, "params": dict(p.params)}


def manifold_from_json(obj: dict, base_dir: str | Path | None = None) -> ManifoldSpec:
    ends = [profile_from_json(e, base_dir) for e in obj.get("ends", [])]
    sings = [profile_from_json(s, base_dir) for s in obj.get("sings", [])]
    glued = obj.get("glued")
    return ManifoldSpec(
        chi=int(obj["chi"]),
        ends=ends,
        sings=sings,
        weyl_energy=float(obj.get("weyl_energy", 0.0)),
        interior_q=float(obj.get("interior_q", 0.0)),
        glue_radius=float(obj.get("glue_radius", 1.0)),
        glued=None if glued is None else [tuple(g) for g in glued],
        core_boundary_T=obj.get("core_boundary_T"),
    )


def validate_scenario(obj: Any) -> dict:
    """Schema check plus the cross-field rules the schema cannot express."""
    try:
        jsonschema.validate(obj, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"invalid scenario at {where}: {exc.message}") from None
    if "catalog" in obj and "profile" in obj:
        raise ScenarioError("give either 'catalog' or 'profile', not both")
    if "params" in obj and "catalog" not in obj:
        raise ScenarioError("'params' needs 'catalog'")
    radial_tasks = {"deficit", "ratios", "local"} & set(obj["tasks"])
    if radial_tasks and "catalog" not in obj and "profile" not in obj:
        raise ScenarioError(f"tasks {sorted(radial_tasks)} need a 'catalog' or 'profile' metric")
    if "lemmas" in obj["tasks"] and not ({"catalog", "profile", "qmeasure"} & set(obj)):
        raise ScenarioError("task 'lemmas' needs a metric or a 'qmeasure'")
    if "manifold" in obj["tasks"] and "manifold" not in obj and not ({"catalog", "profile"} & set(obj)):
        raise ScenarioError("task 'manifold' needs a 'manifold' spec or a radial metric")
    return obj


# --------------------------------------------------------------------------
# deterministic output
# --------------------------------------------------------------------------


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return '"undefined"'
    s = format(x, ".17g")
    if s in ("0", "-0"):
        return "0.0"
    if all(c in "-0123456789" for c in s):
        s += ".0"
    return s


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return '"undefined"'
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) or v is None for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_report(obj: Any, indent: int = 2) -> str:
    """JSON text with insertion-ordered keys and 17-digit floats."""
    return _encode(obj, indent, 0) + "\n"


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
