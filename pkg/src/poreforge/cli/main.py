"""Typer app: root callback (logging, version) and command registration."""

from __future__ import annotations

from typing import Optional

import typer

from poreforge import __version__
from poreforge.utils.output import configure_logging

app = typer.Typer(
    name="poreforge",
    help="poreforge: 3D porous microstructure reconstruction from a single 2D image.",
    no_args_is_help=True,
)


def _version(value: bool) -> None:
    if value:
        typer.echo(f"poreforge {__version__}")
        raise typer.Exit()


@app.callback()
def main(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Warnings and errors only"),
    version: Optional[bool] = typer.Option(
        None, "--version", callback=_version, is_eager=True, help="Show version and exit"
    ),
) -> None:
    """Reconstruct, evaluate and compare porous microstructures."""
    configure_logging(verbose=verbose, quiet=quiet)


def _register_subcommands() -> None:
    """Register all commands (imports inside function to avoid E402)."""
    from poreforge.cli.analyze_cmd import register_analyze_commands
    from poreforge.cli.config_cmd import config_app
    from poreforge.cli.evaluate_cmd import evaluate_command
    from poreforge.cli.reconstruct_cmd import reconstruct_command
    from poreforge.cli.sa_cmd import sa_command
    from poreforge.cli.sweep_cmd import sweep_command
    from poreforge.cli.synth_cmd import synth_command
    from poreforge.cli.train_cmd import train_command

    register_analyze_commands(app)
    app.command("train")(train_command)
    app.command("reconstruct")(reconstruct_command)
    app.command("evaluate")(evaluate_command)
    app.command("sa")(sa_command)
    app.command("synth")(synth_command)
    app.command("sweep")(sweep_command)
    app.add_typer(config_app, name="config", help="Inspect and validate run configs")


_register_subcommands()
