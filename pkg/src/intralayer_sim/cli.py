"""Command line: validate a scenario, run it, rebuild a report from a log.

    intralayer-sim validate --config scenario.yaml
    intralayer-sim run --config scenario.yaml --seed 7 --epochs 12 --out out/
    intralayer-sim report out/events.jsonl --out rebuilt/

Exit codes: 0 success, 1 invalid input (scenario, log, or option), 2 file
system error, 3 internal error. Logging goes to stderr at the level named by
INTRALAYER_SIM_LOG_LEVEL (error, warn, info, debug; default warn).

:author: Shay Hill
:created: 2025-02-20
"""

import logging
import os
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated

import typer

from intralayer_sim.config import load_scenario, with_overrides
from intralayer_sim.engine import run
from intralayer_sim.errors import (
    CorruptLog,
    ScenarioParseError,
    ScenarioValidationError,
    SchemaMismatch,
)
from intralayer_sim.globs import LOG_LEVEL_ENV
from intralayer_sim.report import (
    METRICS_FILE,
    SUMMARY_FILE,
    format_metrics_csv,
    render_summary,
    replay_log,
    write_artifacts,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2
EXIT_INTERNAL = 3

FORMATS = ("csv", "jsonl")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

app = typer.Typer(
    name="intralayer-sim",
    help="Discrete-time simulation of an intra-layer settlement ecosystem.",
    add_completion=False,
    no_args_is_help=True,
)


def configure_logging(level: str | None) -> int:
    """Point the root logger at stderr.

    :param level: one of error, warn, info, debug. Anything else means warn.
    :return: the logging level set
    """
    numeric = _LOG_LEVELS.get((level or "warn").strip().lower(), logging.WARNING)
    logging.basicConfig(
        level=numeric, format="%(levelname)s %(name)s: %(message)s", force=True
    )
    return numeric


@app.callback()
def main() -> None:
    """Simulate, validate, and report on intra-layer scenarios."""
    _ = configure_logging(os.environ.get(LOG_LEVEL_ENV))


@contextmanager
def _exit_codes() -> Iterator[None]:
    """Map failures to exit codes and print them one per line on stderr."""
    try:
        yield
    except typer.Exit:
        raise
    except ScenarioValidationError as e:
        for error in e.errors:
            typer.echo(error, err=True)
        raise typer.Exit(EXIT_INVALID) from e
    except (ScenarioParseError, CorruptLog, SchemaMismatch) as e:
        typer.echo(str(e), err=True)
        raise typer.Exit(EXIT_INVALID) from e
    except FileNotFoundError as e:
        typer.echo(f"no such file: {e.filename}", err=True)
        raise typer.Exit(EXIT_IO) from e
    except OSError as e:
        typer.echo(f"i/o error: {e}", err=True)
        raise typer.Exit(EXIT_IO) from e
    except Exception as e:
        logger.exception("internal error")
        typer.echo(f"internal error: {e}", err=True)
        raise typer.Exit(EXIT_INTERNAL) from e


@app.command()
def validate(
    config: Annotated[Path, typer.Option("--config", help="Scenario YAML file.")],
) -> None:
    """Check a scenario and print every error found."""
    with _exit_codes():
        _ = load_scenario(config)
    typer.echo(f"{config}: ok")


@app.command("run")
def run_command(
    config: Annotated[Path, typer.Option("--config", help="Scenario YAML file.")],
    out: Annotated[Path, typer.Option("--out", help="Output directory.")] = Path("out"),
    seed: Annotated[
        int | None, typer.Option("--seed", help="Override the scenario seed.")
    ] = None,
    epochs: Annotated[
        int | None, typer.Option("--epochs", help="Override the scenario horizon.")
    ] = None,
    formats: Annotated[
        list[str] | None,
        typer.Option("--format", help="csv or jsonl. Repeat for both (the default)."),
    ] = None,
) -> None:
    """Run a scenario and write its artifacts. Prints the event log hash."""
    chosen = tuple(formats) if formats else FORMATS
    unknown = sorted(set(chosen) - set(FORMATS))
    if unknown:
        typer.echo(f"--format: unknown format {', '.join(unknown)}", err=True)
        raise typer.Exit(EXIT_INVALID)
    with _exit_codes():
        scenario = with_overrides(load_scenario(config), seed=seed, epochs=epochs)
        result = run(scenario)
        written = write_artifacts(result, out, chosen)
    for path in written:
        logger.info("wrote %s", path)
    typer.echo(result.log_hash)


@app.command()
def report(
    events: Annotated[Path, typer.Argument(help="An events.jsonl written by run.")],
    out: Annotated[
        Path | None,
        typer.Option("--out", help="Write metrics.csv and summary.txt here."),
    ] = None,
) -> None:
    """Recompute the metrics and summary of a written event log.

    Without --out the metrics CSV goes to stdout.
    """
    with _exit_codes():
        log, rows = replay_log(events)
        text = format_metrics_csv(rows)
        if out is None:
            typer.echo(text, nl=False)
            return
        out.mkdir(parents=True, exist_ok=True)
        _ = (out / METRICS_FILE).write_text(text, encoding="utf-8", newline="")
        if len(log):
            summary = render_summary(log.records)
            _ = (out / SUMMARY_FILE).write_text(summary, encoding="utf-8")
        typer.echo(log.digest())
