import dataclasses
import importlib.metadata
import logging
from pathlib import Path
from typing import Optional

import typer

from saew.calibration import BudgetExceededError
from saew.core import InvalidInputError
from saew_harness import ConfigError, load_config, run_experiment
from saew_harness.file_utils import run_files
from saew_harness.plots import plot_run_dir
from saew_harness.summary import summarize

app = typer.Typer(
    no_args_is_help=True,
    help="Run, summarize and plot sparse online regression experiments.",
)


def _find_first_dist_version(*names: str) -> Optional[str]:
    """Return the first found installed distribution version for the given names."""
    for name in names:
        try:
            return importlib.metadata.version(name)
        except importlib.metadata.PackageNotFoundError:
            continue
    return None


def _version_callback(ctx: typer.Context, param, value: bool):
    if not value or ctx.resilient_parsing:
        return
    for label, dist in (("saew", "saew"), ("harness", "saew-harness")):
        version = _find_first_dist_version(dist)
        typer.echo(f"{label}: {version if version is not None else 'not installed'}")
    ctx.exit()


@app.callback()
def _default(
    version: bool = typer.Option(
        False,
        "--version",
        "-V",
        callback=_version_callback,
        is_eager=True,
        help="Show component versions and exit.",
    ),
):
    """Sparse online regression experiments."""


def _fail(error, code: int):
    typer.echo(f"error: {error}", err=True)
    raise typer.Exit(code=code)


def _guarded(action):
    # invalid input exits 2, an unwritable destination 3
    try:
        return action()
    except (ConfigError, InvalidInputError, BudgetExceededError) as error:
        _fail(error, 2)
    except OSError as error:
        _fail(error, 3)


def _load(config_path: Path):
    if not config_path.is_file():
        _fail(f"config file {config_path} does not exist", 2)
    return _guarded(lambda: load_config(config_path))


def _existing_dir(run_dir: Path):
    if not run_dir.is_dir():
        _fail(f"{run_dir} is not a directory", 2)
    return run_dir


def _set_verbosity(verbose: bool):
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


def _report(result):
    typer.echo(f"wrote {len(result.run_files)} runs to {result.output}")
    for name, value in result.summary.scalars.items():
        typer.echo(f"  {name}: {value:.6g}")


@app.command()
def run(
    config: Path = typer.Option(..., "--config", "-c", help="Experiment INI file."),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Overrides [run] output."),
    trace_bounds: bool = typer.Option(
        False, "--trace-bounds", help="Record the theoretical bounds next to SAEW runs."
    ),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log session boundaries."),
):
    """Run every seed of an experiment and write its summary."""
    _set_verbosity(verbose)
    experiment = _load(config)
    result = _guarded(
        lambda: run_experiment(experiment, output=out, trace_bounds=trace_bounds or None)
    )
    _report(result)


@app.command()
def calibrate(
    config: Path = typer.Option(..., "--config", "-c", help="Experiment INI file."),
    y_bound: Optional[float] = typer.Option(
        None, "--Y", help="Almost sure bound on |Y|, defaults to the design bound."
    ),
    delta: Optional[float] = typer.Option(None, "--delta", help="Total failure probability."),
    budget: Optional[int] = typer.Option(None, "--budget", help="Maximum candidate steps."),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Overrides [run] output."),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log closed sessions."),
):
    """Run the parameter-free calibration over the doubling grid."""
    _set_verbosity(verbose)
    experiment = _load(config)
    overrides = {
        key: value
        for key, value in (("Y", y_bound), ("delta", delta), ("budget", budget))
        if value is not None
    }
    experiment = dataclasses.replace(
        experiment,
        run=dataclasses.replace(experiment.run, algorithm="calibrate"),
        calibrate=dataclasses.replace(experiment.calibrate, **overrides),
    )
    _report(_guarded(lambda: run_experiment(experiment, output=out)))


@app.command("summarize")
def summarize_dir(
    run_dir: Path = typer.Argument(..., help="Directory holding seed_<n>.csv files."),
):
    """Aggregate the runs of a directory into summary.csv and summary.json."""
    _existing_dir(run_dir)

    def action():
        files = run_files(run_dir)
        if not files:
            raise InvalidInputError(f"no seed_<n>.csv run files in {run_dir}")
        summary = summarize(files)
        summary.write(run_dir)
        return summary

    summary = _guarded(action)
    typer.echo(f"summarized {summary.n_runs} runs over T={len(summary.t)}")
    for name, value in summary.scalars.items():
        typer.echo(f"  {name}: {value:.6g}")


@app.command()
def plots(
    run_dir: Path = typer.Argument(..., help="Directory holding seed_<n>.csv files."),
    plot_dir: Optional[Path] = typer.Option(None, "--plot-dir", help="Defaults to <run_dir>/plots."),
):
    """Emit gnuplot scripts and data for a run directory."""
    _existing_dir(run_dir)
    written = _guarded(lambda: plot_run_dir(run_dir, plot_dir))
    for fpath in written:
        typer.echo(str(fpath))


def main():
    app()


if __name__ == "__main__":
    main()
