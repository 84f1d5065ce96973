"""Options, config loading and error-to-exit-code mapping shared by all commands."""

from __future__ import annotations

from collections.abc import Iterator, Mapping
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Optional

import typer
from pydantic import BaseModel, ValidationError

from poreforge.core.descriptors import DescriptorError
from poreforge.core.schema import RunConfig
from poreforge.core.synthetic import SyntheticError
from poreforge.core.volume import VolumeFormatError
from poreforge.nn.losses import LossError
from poreforge.nn.network import ModelFormatError, NetworkError
from poreforge.nn.ops import EngineError
from poreforge.nn.optimizer import OptimizerError
from poreforge.pipeline.anneal import AnnealError
from poreforge.pipeline.evaluate import EvaluationError
from poreforge.pipeline.noise import NoiseError
from poreforge.pipeline.reconstructor import ReconstructionError
from poreforge.pipeline.runs import RunError
from poreforge.pipeline.trainer import TrainingError
from poreforge.utils.config import ConfigError, load_run_config
from poreforge.utils.output import error, output, output_table

EXIT_CONFIG = 2
EXIT_RUNTIME = 3

FORMAT_OPTION = typer.Option(None, "--format", "-F", help="Output format: json or text")
CONFIG_OPTION = typer.Option(None, "--config", "-c", help="JSON run config")
SEED_OPTION = typer.Option(None, "--seed", min=0, help="Seed for this stage")
OUT_OPTION = typer.Option(None, "--out", "-o", help="Output directory (default: output_dir)")
SET_OPTION = typer.Option(
    None, "--set", "-s", help="Override a config value: section.key=value (repeatable)"
)

RUNTIME_ERRORS: tuple[type[BaseException], ...] = (
    VolumeFormatError,
    DescriptorError,
    EngineError,
    NetworkError,
    ModelFormatError,
    LossError,
    OptimizerError,
    TrainingError,
    ReconstructionError,
    AnnealError,
    EvaluationError,
    NoiseError,
    RunError,
    SyntheticError,
    OSError,
)


def _validation_message(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        where = ".".join(str(p) for p in err["loc"]) or "config"
        parts.append(f"{where}: {err['msg']}")
    return "Invalid config: " + "; ".join(parts)


@contextmanager
def handle_errors() -> Iterator[None]:
    """Print a failure and exit 2 for config problems, 3 for runtime errors."""
    try:
        yield
    except ConfigError as e:
        error(str(e))
        raise typer.Exit(EXIT_CONFIG)
    except ValidationError as e:
        error(_validation_message(e))
        raise typer.Exit(EXIT_CONFIG)
    except RUNTIME_ERRORS as e:
        error(str(e))
        raise typer.Exit(EXIT_RUNTIME)


def load_config(
    config: Optional[Path],
    overrides: Optional[list[str]],
    flags: Mapping[str, Any] | None = None,
) -> RunConfig:
    """Load a RunConfig, exiting with code 2 on any config problem."""
    with handle_errors():
        cfg = load_run_config(config, overrides or (), flags)
    return cfg


def show_summary(report: BaseModel, fmt: Optional[str], title: str, fields: list[str]) -> None:
    """Full report as JSON, or the selected fields as a two-column table."""
    if fmt == "json":
        output(report, fmt="json")
        return
    data = report.model_dump(mode="json")
    rows = [{"field": f, "value": data[f]} for f in fields if data.get(f) is not None]
    output_table(rows, ["field", "value"], fmt="text", title=title)
