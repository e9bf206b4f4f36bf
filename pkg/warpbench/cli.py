"""CLI for warpbench: run verification scenarios on model manifolds."""

from __future__ import annotations

import logging
from collections.abc import Callable

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from warpbench.config import load_scenario, parse_calibration
from warpbench.errors import EXIT_CODES, WarpbenchError
from warpbench.models import Command, ScenarioResult
from warpbench.reports import clean
from warpbench.runner import run_scenario

console = Console()

STATUS_STYLES = {
    0: "bold green",
    1: "bold magenta",
    2: "yellow",
    3: "bold red",
    4: "dark_orange",
}


def _parse_calibration(
    ctx: click.Context, param: click.Parameter, pairs: tuple[str, ...]
) -> dict[str, float]:
    """Parse repeated 'key=val' options into calibration overrides."""
    try:
        return parse_calibration(pairs)
    except WarpbenchError as e:
        raise click.BadParameter(str(e)) from e


def _setup_logging(verbose: int) -> None:
    if not verbose:
        return
    logging.basicConfig(
        level=logging.DEBUG if verbose > 1 else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), rich_tracebacks=True)],
    )


def _format_value(value: object) -> str:
    if isinstance(value, float):
        return f"{value:.10g}"
    if isinstance(value, dict):
        return ", ".join(f"{k}={_format_value(v)}" for k, v in value.items())
    return str(value)


def _print_result(result: ScenarioResult) -> None:
    style = STATUS_STYLES.get(result.exit_code, "white")
    label = EXIT_CODES.get(result.exit_code, "unknown").upper()
    console.print(
        f"\n  [{style}][{label}][/{style}]  [bold]{result.scenario}[/bold]  ({result.command.value})"
    )
    if result.error:
        console.print(f"          {result.error['type']}: {result.error['message']}")

    summary = clean(result.summary)
    if summary:
        table = Table(show_header=True, header_style="bold")
        table.add_column("Quantity", width=28)
        table.add_column("Value")
        for key in sorted(summary):
            value = summary[key]
            if isinstance(value, list):
                value = f"[{len(value)} entries]"
            table.add_row(key, _format_value(value))
        console.print(table)
    console.print(f"\n[dim]{len(result.rows)} row(s), exit code {result.exit_code}[/dim]")


def scenario_command(command: Command) -> Callable:
    """Register a subcommand that loads a scenario file and runs it."""

    def decorator(fn: Callable) -> Callable:
        @cli.command(name=command.value, help=fn.__doc__)
        @click.option(
            "--config",
            "config_path",
            required=True,
            type=click.Path(exists=True, dir_okay=False),
            help="Scenario file",
        )
        @click.option("--out", "out_dir", default=None, help="Directory for CSV/JSON reports")
        @click.option("--parallel", default=1, type=click.IntRange(min=1), help="Worker processes")
        @click.option("--tol", default=None, type=float, help="Override the scenario tolerance")
        @click.option(
            "--calibration",
            multiple=True,
            callback=_parse_calibration,
            metavar="KEY=VAL",
            help="Calibration override (repeatable)",
        )
        @click.pass_context
        def wrapper(
            ctx: click.Context,
            config_path: str,
            out_dir: str | None,
            parallel: int,
            tol: float | None,
            calibration: dict[str, float],
        ) -> None:
            try:
                scenario = load_scenario(
                    config_path,
                    command=command,
                    tol=tol,
                    calibration=calibration,
                    out_dir=out_dir,
                    parallel=parallel,
                )
            except WarpbenchError as e:
                console.print(f"[bold red]Configuration error:[/bold red] {e}")
                ctx.exit(e.exit_code)
            result = run_scenario(scenario)
            _print_result(result)
            if out_dir:
                console.print(f"[dim]Reports written to {out_dir}[/dim]")
            ctx.exit(result.exit_code)

        return wrapper

    return decorator


@click.group()
@click.option("-v", "--verbose", count=True, help="Log progress (-vv for debug output)")
@click.version_option(package_name="warpbench")
def cli(verbose: int) -> None:
    """warpbench: numerical checks on rotationally symmetric model manifolds."""
    _setup_logging(verbose)


@scenario_command(Command.REPORT_CURVATURE)
def report_curvature() -> None:
    """Ricci eigenvalues, Ric_- and the curvature envelope (K, alpha, b0)."""


@scenario_command(Command.REPORT_KATO)
def report_kato() -> None:
    """Elliptic Kato constant, gauge function and the conformal Bakry-Emery check."""


@scenario_command(Command.VERIFY_ISOPERIMETRIC)
def verify_isoperimetric() -> None:
    """Isoperimetric ratio of pole-centred balls against the Kato-corrected constant."""


@scenario_command(Command.VERIFY_ABP)
def verify_abp() -> None:
    """ABP transport on a ball: Jacobian bound, Riccati inequality and weighted Sobolev."""


@scenario_command(Command.VERIFY_GREEN_BOUNDS)
def verify_green_bounds() -> None:
    """Green kernel, energy identity and the constant ledger against exact values."""


@scenario_command(Command.VERIFY_OFFCENTER)
def verify_offcenter() -> None:
    """Off-center ball volumes, Ahlfors regularity and condition (VC)."""


@scenario_command(Command.SWEEP)
def sweep() -> None:
    """Run another command over a parameter grid."""
