"""Command line interface.

Subcommands:

* ``simulate``   -- draw a trajectory from a model file, one value per line
* ``fit``        -- QMLE of a single model on a series
* ``select``     -- penalized selection over a candidate grid
* ``test``       -- portmanteau goodness-of-fit test of one fitted model
* ``pipeline``   -- returns ingestion + selection + test in one pass
* ``mc-select``  -- Monte Carlo model-selection experiment
* ``mc-sizepower`` -- Monte Carlo size/power experiment of the test

Model files are YAML documents ``{model: {family: {...}, active: [...]},
params: [...]}``; grids are ``{kind: ..., ...}`` dictionaries; experiments
follow the :class:`affinecausal.harness.ExperimentConfig` schema.
"""

from __future__ import annotations

import sys

import click
import numpy as np
import yaml

from . import __version__
from .diagnostics import DiagnosticsError, portmanteau, portmanteau_arch
from .estimation import FitError, OptimizerOptions, attach_covariance, fit_qmle
from .families import SimulationError, simulate
from .harness import (
    ExperimentConfig,
    emit_report,
    load_model_file,
    load_returns,
    run_pipeline,
    run_selection_experiment,
    run_size_power_experiment,
)
from .selection import Penalty, enumerate_candidates, fit_candidates, rank_candidates

_USER_ERRORS = (
    ValueError,
    KeyError,
    FileNotFoundError,
    FitError,
    SimulationError,
    DiagnosticsError,
    yaml.YAMLError,
)


def _fail(exc: BaseException) -> "NoReturn":  # noqa: F821
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


def _read_series(path: str) -> np.ndarray:
    try:
        return load_returns(path, scheme="returns").values
    except _USER_ERRORS as exc:
        _fail(exc)


def _load_grid(path: str):
    with open(path) as fh:
        return enumerate_candidates(yaml.safe_load(fh))


@click.group()
@click.version_option(__version__)
def main():
    """Quasi-likelihood estimation, model selection and diagnostics for
    affine causal time series."""


@main.command("simulate")
@click.argument("model_file", type=click.Path(exists=True))
@click.option("-n", "--length", type=int, required=True, help="observations to keep")
@click.option("--burn-in", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--output", type=click.Path(), default="-", show_default=True)
def simulate_cmd(model_file, length, burn_in, seed, output):
    """Simulate a trajectory from MODEL_FILE; one value per line."""
    try:
        spec, params = load_model_file(model_file)
        if params is None:
            raise ValueError("model file has no 'params' entry to simulate from")
        x = simulate(spec, params, length, burn_in=burn_in, seed=seed)
    except _USER_ERRORS as exc:
        _fail(exc)
    text = "\n".join(f"{v:.17g}" for v in x.values) + "\n"
    if output == "-":
        click.echo(text, nl=False)
    else:
        with open(output, "w") as fh:
            fh.write(text)


@main.command("fit")
@click.argument("model_file", type=click.Path(exists=True))
@click.argument("data_file", type=click.Path(exists=True))
@click.option("--restarts", type=int, default=2, show_default=True)
@click.option("--no-covariance", is_flag=True, help="skip standard errors")
def fit_cmd(model_file, data_file, restarts, no_covariance):
    """Fit one model by Gaussian QMLE and print a summary."""
    x = _read_series(data_file)
    try:
        spec, _ = load_model_file(model_file)
        opts = OptimizerOptions(restarts=restarts, compute_covariance=not no_covariance)
        result = fit_qmle(spec, x, opts)
    except _USER_ERRORS as exc:
        _fail(exc)
    click.echo(result.summary())


@main.command("select")
@click.argument("grid_file", type=click.Path(exists=True))
@click.argument("data_file", type=click.Path(exists=True))
@click.option("--penalty", default="sqrt_n", show_default=True,
              help="log_n, sqrt_n or power:<delta>")
@click.option("--restarts", type=int, default=2, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text",
              show_default=True)
@click.option("-o", "--output", type=click.Path(), default=None)
def select_cmd(grid_file, data_file, penalty, restarts, fmt, output):
    """Penalized model selection over the candidates in GRID_FILE."""
    x = _read_series(data_file)
    try:
        candidates = _load_grid(grid_file)
        pen = Penalty.parse(penalty)
        opts = OptimizerOptions(restarts=restarts, compute_covariance=False)
        fits = fit_candidates(x, candidates, opts)
        report = rank_candidates(candidates, fits, pen, x.size)
    except _USER_ERRORS as exc:
        _fail(exc)
    out = emit_report(report, format=fmt, path=output) if fmt == "json" \
        else report.format_text() + "\n"
    if output is None:
        click.echo(out, nl=False)
    elif fmt == "text":
        with open(output, "w") as fh:
            fh.write(out)


@main.command("test")
@click.argument("model_file", type=click.Path(exists=True))
@click.argument("data_file", type=click.Path(exists=True))
@click.option("-K", "--lags", type=int, default=3, show_default=True)
@click.option("--arch-order", type=int, default=None,
              help="use the simplified ARCH(p) statistic with this p")
@click.option("--restarts", type=int, default=2, show_default=True)
def test_cmd(model_file, data_file, lags, arch_order, restarts):
    """Portmanteau test of MODEL_FILE fitted to DATA_FILE."""
    x = _read_series(data_file)
    try:
        spec, _ = load_model_file(model_file)
        fit = fit_qmle(spec, x, OptimizerOptions(restarts=restarts))
        if arch_order is not None:
            report = portmanteau_arch(fit, x, arch_order, K=lags)
        else:
            report = portmanteau(spec, fit, x, K=lags)
    except _USER_ERRORS as exc:
        _fail(exc)
    click.echo(report.format_text())


@main.command("pipeline")
@click.argument("grid_file", type=click.Path(exists=True))
@click.argument("data_file", type=click.Path(exists=True))
@click.option("--scheme", type=click.Choice(["prices", "returns"]), default="prices",
              show_default=True)
@click.option("--scale", type=float, default=100.0, show_default=True,
              help="multiplier applied to the (log-)returns")
@click.option("--penalty", "penalties", multiple=True, default=("log_n", "sqrt_n"),
              show_default=True)
@click.option("-K", "--lags", type=int, default=3, show_default=True)
@click.option("--restarts", type=int, default=2, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text",
              show_default=True)
@click.option("-o", "--output", type=click.Path(), default=None)
def pipeline_cmd(grid_file, data_file, scheme, scale, penalties, lags, restarts, fmt, output):
    """Ingest a price/return series, select per penalty and test each winner."""
    try:
        x = load_returns(data_file, scheme=scheme, scale=scale)
        candidates = _load_grid(grid_file)
        pens = [Penalty.parse(p) for p in penalties]
        opts = OptimizerOptions(restarts=restarts, compute_covariance=False)
        report = run_pipeline(x, candidates, pens, K=lags, opts=opts)
        out = emit_report(report, format=fmt, path=output)
    except _USER_ERRORS as exc:
        _fail(exc)
    if output is None:
        click.echo(out, nl=False)


def _run_experiment(config_file, fmt, output, runner):
    try:
        cfg = ExperimentConfig.from_yaml(config_file)
        report = runner(cfg)
        out = emit_report(report, format=fmt, path=output)
    except _USER_ERRORS as exc:
        _fail(exc)
    if output is None:
        click.echo(out, nl=False)


@main.command("mc-select")
@click.argument("config_file", type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text",
              show_default=True)
@click.option("-o", "--output", type=click.Path(), default=None)
def mc_select_cmd(config_file, fmt, output):
    """Monte Carlo model-selection experiment from a YAML config."""
    _run_experiment(config_file, fmt, output, run_selection_experiment)


@main.command("mc-sizepower")
@click.argument("config_file", type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text",
              show_default=True)
@click.option("-o", "--output", type=click.Path(), default=None)
def mc_sizepower_cmd(config_file, fmt, output):
    """Monte Carlo size/power experiment of the portmanteau test."""
    _run_experiment(config_file, fmt, output, run_size_power_experiment)


if __name__ == "__main__":  # pragma: no cover
    main()
