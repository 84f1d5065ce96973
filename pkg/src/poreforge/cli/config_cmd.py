"""Config subcommands: schema, validate, show."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import typer

from poreforge.cli._shared import (
    CONFIG_OPTION,
    FORMAT_OPTION,
    SET_OPTION,
    handle_errors,
    load_config,
)
from poreforge.utils.config import config_schema, get_dotpath, validate_config_file
from poreforge.utils.output import info, output, success

config_app = typer.Typer(no_args_is_help=True)


@config_app.command("schema")
def config_schema_cmd() -> None:
    """Print the JSON Schema of the run config."""
    print(json.dumps(config_schema(), indent=2))


@config_app.command("validate")
def config_validate(
    path: Path = typer.Argument(..., help="Config file to check"),
    fmt: Optional[str] = FORMAT_OPTION,
) -> None:
    """Validate a config file without running anything."""
    with handle_errors():
        validate_config_file(path)
    if fmt == "json":
        output({"path": str(path), "valid": True}, fmt="json")
    else:
        success(f"{path} is valid")


@config_app.command("show")
def config_show(
    key: Optional[str] = typer.Argument(None, help="Dotted path, e.g. train.iterations"),
    config: Optional[Path] = CONFIG_OPTION,
    overrides: Optional[list[str]] = SET_OPTION,
    fmt: Optional[str] = FORMAT_OPTION,
) -> None:
    """Show the resolved config (defaults, file, overrides) or one value of it."""
    cfg = load_config(config, overrides)
    if key is None:
        output(cfg, fmt="json" if fmt == "json" else "text")
        return
    with handle_errors():
        value = get_dotpath(cfg, key)
    if fmt == "json":
        output({"key": key, "value": value}, fmt="json")
    else:
        info(f"{key}: {json.dumps(value)}")
