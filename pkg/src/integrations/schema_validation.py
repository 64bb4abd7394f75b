"""JSON Schema validation of report payloads against the files in docs/schemas."""

import json
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict

from jsonschema import Draft202012Validator
from jsonschema.exceptions import ValidationError

from src.core.errors import ConsistencyError

SCHEMA_DIR = Path(__file__).resolve().parents[2] / "docs" / "schemas"


@lru_cache(maxsize=None)
def load_validator(name: str) -> Draft202012Validator:
    path = SCHEMA_DIR / f"{name}.schema.json"
    if not path.exists():
        raise FileNotFoundError(f"Report schema not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        schema = json.load(f)
    Draft202012Validator.check_schema(schema)
    return Draft202012Validator(schema, format_checker=Draft202012Validator.FORMAT_CHECKER)


def validate_report(payload: Dict[str, Any], name: str) -> None:
    """Raise ConsistencyError when a report payload does not match its published schema."""
    try:
        load_validator(name).validate(payload)
    except ValidationError as e:
        location = '/'.join(str(part) for part in e.absolute_path) or '<root>'
        raise ConsistencyError(f"{name} report fails its schema at {location}: {e.message}")
