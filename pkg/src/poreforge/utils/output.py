"""Console output: text vs JSON rendering, rich tables, log handler setup."""

from __future__ import annotations

import json
import logging
import sys
from typing import Any

from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

console = Console()
error_console = Console(stderr=True)


def is_piped() -> bool:
    return not sys.stdout.isatty()


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    """Route the package logger through rich on stderr."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logger = logging.getLogger("poreforge")
    for handler in list(logger.handlers):
        if isinstance(handler, RichHandler):
            logger.removeHandler(handler)
    handler = RichHandler(console=error_console, show_path=False, markup=False)
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.setLevel(level)
    logger.propagate = False


def output(data: Any, fmt: str | None = None) -> None:
    """Print a report model, dict or list; json when piped or asked for, else highlighted."""
    if fmt is None:
        fmt = "json" if is_piped() else "text"

    if hasattr(data, "model_dump_json"):
        text = data.model_dump_json(indent=2)
    else:
        text = json.dumps(data, indent=2, default=str)
    if fmt == "json":
        print(text)
    else:
        console.print_json(text)


def output_table(
    rows: list[dict[str, Any]], columns: list[str], fmt: str | None = None, title: str | None = None
) -> None:
    if fmt is None:
        fmt = "json" if is_piped() else "text"

    if fmt == "json":
        print(json.dumps(rows, indent=2, default=str))
    else:
        table = Table(title=title)
        for col in columns:
            table.add_column(col)
        for row in rows:
            table.add_row(*[_cell(row.get(col, "")) for col in columns])
        console.print(table)


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def error(msg: str) -> None:
    error_console.print(f"[red]Error:[/red] {escape(msg)}", highlight=False)


def success(msg: str) -> None:
    console.print(f"[green]{escape(msg)}[/green]")


def info(msg: str) -> None:
    console.print(f"[dim]{escape(msg)}[/dim]")
