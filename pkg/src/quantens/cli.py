"""Command-line interface.

Subcommands compose through the output directory: ``combine`` writes the
ensemble panels, ``evaluate``/``trade``/``dm-matrix`` consume them, and
``report`` runs the whole pipeline plus SVG charts. Every command exits 0 on
success; on failure it prints a single machine-readable JSON line to stderr
and exits nonzero.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import pipeline
from .config import RunConfig, load_config
from .data import load_prices
from .errors import QuantensError
from .fetch import DATASET_DOC, fetch_dataset


def _fail(exc: BaseException) -> None:
    message = " ".join(str(exc).split()) or exc.__class__.__name__
    line = json.dumps({"error": exc.__class__.__name__, "message": message},
                      sort_keys=True)
    click.echo(line, err=True)
    sys.exit(1)


def _command_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (QuantensError, OSError, ValueError) as exc:
            _fail(exc)

    return wrapper


def _resolve_out(config: RunConfig, out: str | None) -> Path:
    return Path(out) if out is not None else config.output_dir


config_option = click.option(
    "--config", "config_path", required=True,
    type=click.Path(exists=False, dir_okay=False),
    help="Path to the YAML run config.",
)
out_option = click.option(
    "--out", "out", default=None, type=click.Path(file_okay=False),
    help="Output directory (defaults to output_dir from the config).",
)


@click.group()
@click.version_option(package_name="quantens")
def main() -> None:
    """Probabilistic electricity-price forecast combination toolkit."""


@main.command("fetch-data")
@click.option("--out", "out", default="data", type=click.Path(file_okay=False),
              help="Directory to download/extract the dataset into.")
@click.option("--docs-only", is_flag=True,
              help="Print dataset documentation without touching the network.")
@_command_errors
def fetch_data(out: str, docs_only: bool) -> None:
    """Download (or document) the public companion dataset."""
    click.echo(DATASET_DOC)
    if docs_only:
        return
    try:
        root = fetch_dataset(out)
    except Exception as exc:  # network errors are environment-specific
        _fail(exc)
        return
    click.echo(f"extracted dataset under {root}")


@main.command()
@config_option
@out_option
@_command_errors
def combine(config_path: str, out: str | None) -> None:
    """Build all configured ensembles and write their panels."""
    config = load_config(config_path)
    out_dir = _resolve_out(config, out)
    data = pipeline.load_dataset(config)
    panels = pipeline.combine_ensembles(config, data, out_dir)
    for name in panels:
        click.echo(f"wrote {pipeline.panels_dir(out_dir) / (name + '.csv')}")


def _load_panels_and_prices(config: RunConfig, out_dir: Path):
    panels = pipeline.read_panels(config, out_dir)
    prices = load_prices(config.price_path)
    first = next(iter(panels.values()))
    return panels, prices.restrict(first.days)


@main.command()
@config_option
@out_option
@_command_errors
def evaluate(config_path: str, out: str | None) -> None:
    """Score combined panels: CRPS/MAE/RMSE, pinball curves, DM matrix."""
    config = load_config(config_path)
    out_dir = _resolve_out(config, out)
    panels, prices = _load_panels_and_prices(config, out_dir)
    report = pipeline.evaluate_models(panels, prices, config.reference, out_dir)
    click.echo(report.metrics.to_string(index=False))
    click.echo(f"wrote {Path(out_dir) / 'evaluation'}")


@main.command()
@config_option
@out_option
@_command_errors
def trade(config_path: str, out: str | None) -> None:
    """Backtest the battery strategy across the risk-appetite grid."""
    config = load_config(config_path)
    out_dir = _resolve_out(config, out)
    panels, prices = _load_panels_and_prices(config, out_dir)
    report = pipeline.trade_models(
        panels, prices, config.alphas, config.profit_check, out_dir
    )
    click.echo(report.totals.to_string())
    click.echo(f"wrote {Path(out_dir) / 'trading'}")


@main.command("dm-matrix")
@config_option
@out_option
@_command_errors
def dm_matrix_cmd(config_path: str, out: str | None) -> None:
    """Pairwise Diebold-Mariano p-value matrix for the combined panels."""
    config = load_config(config_path)
    out_dir = _resolve_out(config, out)
    panels, prices = _load_panels_and_prices(config, out_dir)
    dm = pipeline.compute_dm(panels, prices)
    dest = Path(out_dir) / "evaluation"
    dest.mkdir(parents=True, exist_ok=True)
    dm.to_csv(dest / "dm_matrix.csv", index_label="model")
    click.echo(dm.to_string())
    click.echo(f"wrote {dest / 'dm_matrix.csv'}")


@main.command()
@config_option
@out_option
@_command_errors
def report(config_path: str, out: str | None) -> None:
    """Run combine + evaluate + trade and render SVG charts."""
    config = load_config(config_path)
    out_dir = _resolve_out(config, out)
    data = pipeline.load_dataset(config)
    panels = pipeline.combine_ensembles(config, data, out_dir)
    if not panels:
        _fail(ValueError("config defines no ensembles; nothing to report"))
    eval_report = pipeline.evaluate_models(
        panels, data.prices, config.reference, out_dir
    )
    trade_report = pipeline.trade_models(
        panels, data.prices, config.alphas, config.profit_check, out_dir
    )
    for path in pipeline.render_plots(eval_report, trade_report, out_dir):
        click.echo(f"wrote {path}")
    click.echo(f"report complete under {out_dir}")


if __name__ == "__main__":
    main()
