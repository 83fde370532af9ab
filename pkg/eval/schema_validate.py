"""
Schema validator for CLI reports.

Checks a report against schemas/report.schema.json and its `data` block against
schemas/<command>.schema.json. Only the JSON Schema keywords used in schemas/
are understood: type, const, enum, required, properties, additionalProperties,
items, minItems, maxItems, minimum, maximum, minLength, pattern.
"""

import json
import os
import re
from typing import Any, Dict, List, Optional, Tuple


SCHEMA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "schemas")

_TYPES = {
    "object": lambda v: isinstance(v, dict),
    "array": lambda v: isinstance(v, list),
    "string": lambda v: isinstance(v, str),
    "boolean": lambda v: isinstance(v, bool),
    "integer": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "number": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    "null": lambda v: v is None,
}


def load_schema(name: str) -> Dict[str, Any]:
    with open(os.path.join(SCHEMA_DIR, f"{name}.schema.json"), "r", encoding="utf-8") as f:
        return json.load(f)


def _type_ok(value: Any, expected) -> bool:
    names = expected if isinstance(expected, list) else [expected]
    return any(_TYPES[n](value) for n in names)


def check(value: Any, schema: Dict[str, Any], path: str = "$") -> List[str]:
    """All violations of `schema` by `value`, as 'path: message' strings."""
    errors: List[str] = []

    if "type" in schema and not _type_ok(value, schema["type"]):
        errors.append(f"{path}: expected {schema['type']}, got {type(value).__name__}")
        return errors

    if "const" in schema and value != schema["const"]:
        errors.append(f"{path}: must equal {schema['const']!r}, got {value!r}")
    if "enum" in schema and value not in schema["enum"]:
        errors.append(f"{path}: {value!r} not in {schema['enum']}")

    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if "minimum" in schema and value < schema["minimum"]:
            errors.append(f"{path}: {value} < minimum {schema['minimum']}")
        if "maximum" in schema and value > schema["maximum"]:
            errors.append(f"{path}: {value} > maximum {schema['maximum']}")

    if isinstance(value, str):
        if "minLength" in schema and len(value) < schema["minLength"]:
            errors.append(f"{path}: shorter than {schema['minLength']}")
        if "pattern" in schema and not re.search(schema["pattern"], value):
            errors.append(f"{path}: {value!r} does not match {schema['pattern']}")

    if isinstance(value, dict):
        for key in schema.get("required", []):
            if key not in value:
                errors.append(f"{path}: missing required field '{key}'")
        props = schema.get("properties", {})
        extra = schema.get("additionalProperties", True)
        for key, item in value.items():
            if key in props:
                errors.extend(check(item, props[key], f"{path}.{key}"))
            elif extra is False:
                errors.append(f"{path}: extra field '{key}' not allowed")
            elif isinstance(extra, dict):
                errors.extend(check(item, extra, f"{path}.{key}"))

    if isinstance(value, list):
        if "minItems" in schema and len(value) < schema["minItems"]:
            errors.append(f"{path}: fewer than {schema['minItems']} items")
        if "maxItems" in schema and len(value) > schema["maxItems"]:
            errors.append(f"{path}: more than {schema['maxItems']} items")
        if "items" in schema:
            for i, item in enumerate(value):
                errors.extend(check(item, schema["items"], f"{path}[{i}]"))

    return errors


def validate_report(report: Any, command: Optional[str] = None) -> Tuple[bool, List[str]]:
    """
    Validate a report dict (parsed JSON) against the envelope schema and the
    data schema of its command.

    Returns:
        (is_valid, error_list)
    """
    if not isinstance(report, dict):
        return False, [f"Report must be dict, got {type(report).__name__}"]

    errors = check(report, load_schema("report"))
    if errors:
        return False, errors

    command = command or report["command"]
    if command != report["command"]:
        return False, [f"Expected command '{command}', got '{report['command']}'"]

    errors = check(report["data"], load_schema(command), "$.data")
    return (not errors), errors
