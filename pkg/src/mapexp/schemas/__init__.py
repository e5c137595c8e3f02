"""Shipped artifact schemas and a small validator for the subset they use.

Every JSON document the package writes (and the model file format it
reads) has a schema under ``mapexp/schemas/``.  The validator covers the
keywords those schemas actually employ: type, enum, const, properties,
required, items, minItems, anyOf, and document-local ``$ref`` into
``$defs``.  It is not a general JSON Schema implementation.
"""

from __future__ import annotations

import json
from importlib import resources

SCHEMA_NAMES = ("model", "validate", "classify", "simulate_summary",
                "estimate", "scenario")

_TYPES = {
    "object": dict,
    "array": list,
    "string": str,
    "boolean": bool,
    "null": type(None),
}


def load_schema(name: str) -> dict:
    if name not in SCHEMA_NAMES:
        raise KeyError(f"unknown schema {name!r}; have {SCHEMA_NAMES}")
    ref = resources.files("mapexp.schemas") / f"{name}.schema.json"
    return json.loads(ref.read_text(encoding="utf-8"))


def _type_ok(value, tname: str) -> bool:
    if tname == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if tname == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    return isinstance(value, _TYPES[tname])


def _resolve(ref: str, root: dict) -> dict:
    if not ref.startswith("#/"):
        raise ValueError(f"only document-local $ref supported, got {ref!r}")
    node = root
    for part in ref[2:].split("/"):
        node = node[part]
    return node


def _check(value, schema: dict, root: dict, path: str, errors: list[str]) -> None:
    if "$ref" in schema:
        _check(value, _resolve(schema["$ref"], root), root, path, errors)
        return
    if "const" in schema and value != schema["const"]:
        errors.append(f"{path}: expected {schema['const']!r}, got {value!r}")
        return
    if "enum" in schema and value not in schema["enum"]:
        errors.append(f"{path}: {value!r} not one of {schema['enum']}")
        return
    if "anyOf" in schema:
        branches = []
        for sub in schema["anyOf"]:
            sub_errors: list[str] = []
            _check(value, sub, root, path, sub_errors)
            if not sub_errors:
                return
            branches.append(sub_errors[0])
        errors.append(f"{path}: no anyOf branch matched ({'; '.join(branches)})")
        return
    if "type" in schema:
        tnames = schema["type"] if isinstance(schema["type"], list) else [schema["type"]]
        if not any(_type_ok(value, t) for t in tnames):
            errors.append(f"{path}: expected {'|'.join(tnames)}, "
                          f"got {type(value).__name__}")
            return
    if isinstance(value, dict):
        for key in schema.get("required", ()):
            if key not in value:
                errors.append(f"{path}: missing required key {key!r}")
        for key, sub in schema.get("properties", {}).items():
            if key in value:
                _check(value[key], sub, root, f"{path}.{key}", errors)
    if isinstance(value, list):
        if "minItems" in schema and len(value) < schema["minItems"]:
            errors.append(f"{path}: fewer than {schema['minItems']} items")
        if "items" in schema:
            for i, item in enumerate(value):
                _check(item, schema["items"], root, f"{path}[{i}]", errors)


def check(doc, schema: dict) -> list[str]:
    """All violations of ``schema`` in ``doc``; empty means valid."""
    errors: list[str] = []
    _check(doc, schema, schema, "$", errors)
    return errors


def artifact_errors(doc, kind: str) -> list[str]:
    """Validate a parsed artifact against the shipped schema ``kind``."""
    return check(doc, load_schema(kind))
