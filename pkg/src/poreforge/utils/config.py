"""Run configuration: JSON files, dotted-path overrides, schema export."""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any, get_args, get_origin

from pydantic import BaseModel, ValidationError

from poreforge.core.schema import RunConfig


class ConfigError(Exception):
    pass


def _section_model(name: str) -> type[BaseModel] | None:
    field = RunConfig.model_fields.get(name)
    if field is None:
        return None
    annotation = field.annotation
    if isinstance(annotation, type) and issubclass(annotation, BaseModel):
        return annotation
    return None


def _is_mapping_field(model: type[BaseModel], key: str) -> bool:
    annotation = model.model_fields[key].annotation
    candidates = [annotation, *get_args(annotation)]
    return any(get_origin(a) is dict or a is dict for a in candidates)


def check_dotpath(dotpath: str) -> list[str]:
    """Split a dotpath like 'train.iterations' and check it names a config field."""
    parts = [p for p in dotpath.split(".") if p]
    if not parts:
        raise ConfigError("Empty dotpath")
    section, rest = parts[0], parts[1:]
    if section not in RunConfig.model_fields:
        raise ConfigError(
            f"Unknown config section '{section}'. Valid: {', '.join(RunConfig.model_fields)}"
        )
    model = _section_model(section)
    if model is None:
        if rest:
            raise ConfigError(f"'{section}' is a value, not a section")
        return parts
    if not rest:
        return parts
    if rest[0] not in model.model_fields:
        raise ConfigError(
            f"Unknown key '{rest[0]}' in section '{section}'. "
            f"Valid: {', '.join(model.model_fields)}"
        )
    if len(rest) > 1 and not _is_mapping_field(model, rest[0]):
        raise ConfigError(f"'{section}.{rest[0]}' has no sub-keys")
    return parts


def parse_value(raw: str) -> Any:
    """JSON when it parses, else the raw string."""
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def set_dotpath(data: dict, dotpath: str, value: Any) -> None:
    """Set a value in a raw config dict at a checked dotpath."""
    parts = check_dotpath(dotpath)
    node = data
    for key in parts[:-1]:
        child = node.get(key)
        if child is None:
            child = {}
            node[key] = child
        elif not isinstance(child, dict):
            raise ConfigError(f"Cannot set '{dotpath}': '{key}' is not a section")
        node = child
    node[parts[-1]] = value


def get_dotpath(config: RunConfig, dotpath: str) -> Any:
    """Resolve a dotpath against a validated config (JSON-compatible result)."""
    parts = check_dotpath(dotpath)
    obj: Any = config.model_dump(mode="json")
    for p in parts:
        if not isinstance(obj, dict) or p not in obj:
            return None
        obj = obj[p]
    return obj


def parse_assignment(item: str) -> tuple[str, Any]:
    if "=" not in item:
        raise ConfigError(f"Override '{item}' must look like section.key=value")
    key, raw = item.split("=", 1)
    return key.strip(), parse_value(raw.strip())


def _resolve_inputs(config: RunConfig, base: Path) -> RunConfig:
    inp = config.input
    updates: dict[str, Any] = {}
    if inp.reference is not None and not inp.reference.is_absolute():
        updates["reference"] = base / inp.reference
    if inp.references is not None:
        updates["references"] = {
            k: (v if v.is_absolute() else base / v) for k, v in inp.references.items()
        }
    if not updates:
        return config
    return config.model_copy(update={"input": inp.model_copy(update=updates)})


def load_run_config(
    path: Path | None = None,
    overrides: Iterable[str] = (),
    flags: Mapping[str, Any] | None = None,
) -> RunConfig:
    """Load a config file (or defaults) and apply overrides before validation.

    ``flags`` maps dotpaths to values from dedicated CLI options; ``None``
    values are skipped. ``overrides`` are ``section.key=value`` strings and
    win over ``flags``. Relative input paths in a file resolve against the
    file's directory.
    """
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"Config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
    for key, value in (flags or {}).items():
        if value is not None:
            set_dotpath(data, key, value)
    for item in overrides:
        key, value = parse_assignment(item)
        set_dotpath(data, key, value)
    config = RunConfig.model_validate(data)
    if path is not None:
        config = _resolve_inputs(config, Path(path).resolve().parent)
    return config


def validate_config_file(path: Path) -> RunConfig:
    """Load and validate without running; raises ConfigError or ValidationError."""
    return load_run_config(path)


def config_schema() -> dict:
    return RunConfig.model_json_schema()


__all__ = [
    "ConfigError",
    "RunConfig",
    "ValidationError",
    "check_dotpath",
    "config_schema",
    "get_dotpath",
    "load_run_config",
    "parse_assignment",
    "parse_value",
    "set_dotpath",
    "validate_config_file",
]
