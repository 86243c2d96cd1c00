"""
Run-configuration loading: JSON file, dotted `key=value` overrides, full
re-validation with field-level diagnostics.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

from pydantic import ValidationError

from cannav.core.errors import ConfigError
from cannav.schemas.config_schemas import RunConfig

logger = logging.getLogger(__name__)


def parse_override_value(raw: str) -> Any:
    """JSON when it parses (`0`, `true`, `[1,2]`), otherwise the raw string."""
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(document: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"Override '{item}' is not of the form key=value")
        node = document
        parts = key.strip().split(".")
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"Override '{key}' descends into non-object field '{part}'")
            node = child
        node[parts[-1]] = parse_override_value(raw)
    return document


def format_validation_error(error: ValidationError) -> str:
    messages = []
    for item in error.errors():
        field = ".".join(str(loc) for loc in item.get("loc", []))
        messages.append(f"{field or '<root>'}: {item.get('msg', 'Validation error')}")
    return "; ".join(messages)


def validate_document(document: Dict[str, Any], source: str = "<config>") -> RunConfig:
    try:
        return RunConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration {source}: {format_validation_error(e)}") from e


def load_run_config(
    path: Optional[Union[str, Path]],
    overrides: Sequence[str] = (),
    seed: Optional[int] = None,
    output_dir: Optional[str] = None,
) -> RunConfig:
    """Read, override and validate a run configuration; `path=None` starts from defaults."""
    document: Dict[str, Any] = {}
    source = "<defaults>"
    if path is not None:
        path = Path(path)
        source = str(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid JSON (line {e.lineno}, column {e.colno}): {e.msg}") from e
        if not isinstance(document, dict):
            raise ConfigError(f"Config file {path} must hold a JSON object")

    apply_overrides(document, overrides)
    if seed is not None:
        document["seed"] = seed
    if output_dir is not None:
        document["output_dir"] = output_dir
    config = validate_document(document, source)
    logger.debug(f"Loaded config {source} (hash {config.config_hash()})")
    return config
