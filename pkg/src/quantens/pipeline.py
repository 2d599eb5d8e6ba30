"""End-to-end pipeline steps shared by the CLI subcommands.

Each step reads/writes plain CSV so the subcommands compose through the
output directory: ``combine`` materializes one panel per ensemble under
``<out>/panels/``, and ``evaluate``/``trade``/``dm-matrix`` consume those
files. All outputs are deterministic: rerunning with the same config and
data produces byte-identical CSVs.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

from .combine import qens_combine
from .config import RunConfig
from .data import (
    PROB_GRID,
    AlignedData,
    ForecastPanel,
    PriceSeries,
    align,
    load_expert_panel,
    load_prices,
    load_quantile_panel,
)
from .learner import OnlineResult, run_online
from .metrics import crps_panel, dm_matrix, mae_median, pinball_by_quantile, rmse_mean
from .trading import (
    RiskConfig,
    TradeLedger,
    crystal_ball,
    naive_fixed,
    run_strategy,
    worst_case,
)

NAIVE_HOURS = (3, 19)
BENCHMARK_ROWS = ("crystal_ball", "worst_case", "naive_3_19")


def _alpha_label(alpha: float) -> str:
    return f"{alpha:g}"


def load_dataset(config: RunConfig) -> AlignedData:
    """Load all configured experts and prices and align them on common days."""
    names = list(config.expert_paths)
    panel = load_expert_panel([config.expert_paths[n] for n in names], names)
    prices = load_prices(config.price_path)
    data = align(panel, prices)
    if data.dropped_panel_days or data.dropped_price_days:
        warnings.warn(
            f"alignment dropped {data.dropped_panel_days} forecast day(s) and "
            f"{data.dropped_price_days} price day(s) outside the common range"
        )
    return data


def panels_dir(out_dir: str | Path) -> Path:
    return Path(out_dir) / "panels"


def combine_ensembles(
    config: RunConfig, data: AlignedData, out_dir: str | Path | None = None
) -> dict[str, ForecastPanel]:
    """Build every configured ensemble; optionally persist panels and, for
    online-learning ensembles, the weight and penalty histories."""
    if not config.ensembles:
        warnings.warn("no ensembles configured; nothing to combine")
        return {}
    dest = None
    if out_dir is not None:
        dest = panels_dir(out_dir)
        dest.mkdir(parents=True, exist_ok=True)

    def build(spec):
        subset = data.panel.subset(spec.experts)
        if spec.averaging == "qEns":
            return qens_combine(subset, name=spec.name), None, subset.names
        result = run_online(subset, data.prices, config.learner, name=spec.name)
        return result.panel, result, subset.names

    # ensembles are independent; the hot kernels release the GIL, so threads
    # overlap their work. Writes stay in config order for determinism.
    if len(config.ensembles) > 1:
        with ThreadPoolExecutor(
            max_workers=min(8, len(config.ensembles))
        ) as pool:
            built = list(pool.map(build, config.ensembles))
    else:
        built = [build(spec) for spec in config.ensembles]

    panels: dict[str, ForecastPanel] = {}
    for spec, (combined, result, expert_names) in zip(config.ensembles, built):
        panels[spec.name] = combined
        if dest is not None:
            combined.to_csv(dest / f"{spec.name}.csv")
            if result is not None:
                _write_histories(dest, spec.name, expert_names, result)
    return panels


def _write_histories(
    dest: Path, name: str, experts: tuple[str, ...], result: OnlineResult
) -> None:
    days = result.panel.days.astype(str)
    pd.DataFrame({"date": days, "lambda": result.lambdas}).to_csv(
        dest / f"{name}_lambda.csv", index=False
    )
    np.savez_compressed(
        dest / f"{name}_weights.npz",
        days=days,
        experts=np.array(experts),
        weights=result.weights,
    )


def read_panels(config: RunConfig, out_dir: str | Path) -> dict[str, ForecastPanel]:
    """Load previously combined panels from disk; fails when one is missing."""
    dest = panels_dir(out_dir)
    panels = {}
    for spec in config.ensembles:
        path = dest / f"{spec.name}.csv"
        if not path.is_file():
            raise FileNotFoundError(
                f"combined panel not found: {path} (run the combine step first)"
            )
        panels[spec.name] = load_quantile_panel(path, name=spec.name)
    return panels


@dataclass(frozen=True)
class EvalReport:
    """Evaluation tables: summary metrics, pinball curves, DM matrix."""

    metrics: pd.DataFrame
    pinball: pd.DataFrame
    dm: pd.DataFrame


def compute_dm(
    panels: Mapping[str, ForecastPanel], prices: PriceSeries
) -> pd.DataFrame:
    losses = {name: crps_panel(p, prices) for name, p in panels.items()}
    return dm_matrix(losses)


def evaluate_models(
    panels: Mapping[str, ForecastPanel],
    prices: PriceSeries,
    reference: str | None = None,
    out_dir: str | Path | None = None,
) -> EvalReport:
    """Score every panel and assemble the evaluation tables.

    The metrics table is sorted ascending by CRPS with name as tie-break.
    Pinball curves are reported relative to the reference model's curve
    (so the reference column is identically 1); when no reference is named
    the lowest-CRPS model is used.
    """
    if not panels:
        raise ValueError("no panels to evaluate")
    rows = []
    curves = {}
    for name in panels:
        panel = panels[name]
        rows.append({
            "model": name,
            "crps": float(crps_panel(panel, prices).mean()),
            "mae": mae_median(panel, prices),
            "rmse": rmse_mean(panel, prices),
        })
        curves[name] = pinball_by_quantile(panel, prices)
    metrics = pd.DataFrame(rows).sort_values(
        ["crps", "model"], kind="stable", ignore_index=True
    )

    if reference is None:
        reference = str(metrics["model"].iloc[0])
    pinball = pd.DataFrame({"quantile": PROB_GRID})
    base = curves[reference]
    # a zero-loss reference (point masses hitting the price) yields NaN ratios
    with np.errstate(divide="ignore", invalid="ignore"):
        for name in panels:
            pinball[name] = curves[name] / base

    dm = compute_dm(panels, prices)
    report = EvalReport(metrics=metrics, pinball=pinball, dm=dm)
    if out_dir is not None:
        write_eval_report(report, out_dir)
    return report


def write_eval_report(report: EvalReport, out_dir: str | Path) -> Path:
    dest = Path(out_dir) / "evaluation"
    dest.mkdir(parents=True, exist_ok=True)
    report.metrics.to_csv(dest / "metrics.csv", index=False)
    report.pinball.to_csv(dest / "pinball_curves.csv", index=False)
    report.dm.to_csv(dest / "dm_matrix.csv", index_label="model")
    return dest


@dataclass(frozen=True)
class TradeReport:
    """Trading tables across the risk-appetite grid.

    totals/per_trade: one row per ensemble plus the three benchmark rows
    (benchmarks do not depend on alpha, so their value repeats across
    columns; benchmark trades are the two unconditional daily orders).
    cumulative: per-day cumulative profit, one column per ensemble/alpha.
    """

    totals: pd.DataFrame
    per_trade: pd.DataFrame
    cumulative: pd.DataFrame
    ledgers: dict[tuple[str, float], TradeLedger]


def trade_models(
    panels: Mapping[str, ForecastPanel],
    prices: PriceSeries,
    alphas: tuple[float, ...],
    profit_check: str = "worst_case",
    out_dir: str | Path | None = None,
) -> TradeReport:
    """Backtest every panel at every risk appetite and tabulate profits."""
    if not panels:
        raise ValueError("no panels to trade")
    if not alphas:
        raise ValueError("empty alpha grid")
    cols = [_alpha_label(a) for a in alphas]
    totals = pd.DataFrame(index=list(panels) + list(BENCHMARK_ROWS),
                          columns=cols, dtype=float)
    per_trade = totals.copy()
    cumulative = pd.DataFrame({"date": prices.days.astype(str)})
    ledgers: dict[tuple[str, float], TradeLedger] = {}

    for name, panel in panels.items():
        for alpha in alphas:
            risk = RiskConfig(alpha=alpha, profit_check=profit_check)
            ledger = run_strategy(panel, prices, risk)
            ledgers[(name, alpha)] = ledger
            col = _alpha_label(alpha)
            totals.loc[name, col] = ledger.total_profit
            per_trade.loc[name, col] = ledger.profit_per_trade
            cumulative[f"{name}@{col}"] = ledger.cumulative_profit()

    bench = {
        "crystal_ball": crystal_ball(prices),
        "worst_case": worst_case(prices),
        "naive_3_19": naive_fixed(prices, *NAIVE_HOURS),
    }
    n_bench_trades = 2 * prices.n_days  # one buy + one sell, every day
    for row, value in bench.items():
        totals.loc[row] = value
        per_trade.loc[row] = value / n_bench_trades

    report = TradeReport(totals=totals, per_trade=per_trade,
                         cumulative=cumulative, ledgers=ledgers)
    if out_dir is not None:
        write_trade_report(report, out_dir)
    return report


def write_trade_report(report: TradeReport, out_dir: str | Path) -> Path:
    dest = Path(out_dir) / "trading"
    ledger_dir = dest / "ledgers"
    ledger_dir.mkdir(parents=True, exist_ok=True)
    report.totals.to_csv(dest / "total_profit.csv", index_label="model")
    report.per_trade.to_csv(dest / "profit_per_trade.csv", index_label="model")
    report.cumulative.to_csv(dest / "cumulative_profit.csv", index=False)
    for (name, alpha), ledger in report.ledgers.items():
        tag = f"{int(round(alpha * 100)):02d}"
        ledger.to_csv(ledger_dir / f"{name}_alpha{tag}.csv")
    return dest


def render_plots(
    eval_report: EvalReport, trade_report: TradeReport, out_dir: str | Path
) -> list[Path]:
    """Self-contained SVG line charts: pinball curves and cumulative profit."""
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "quantens"  # reproducible SVG ids
    dest = Path(out_dir) / "report"
    dest.mkdir(parents=True, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name in eval_report.pinball.columns[1:]:
        ax.plot(eval_report.pinball["quantile"], eval_report.pinball[name],
                label=name, linewidth=1.2)
    ax.set_xlabel("probability level")
    ax.set_ylabel("pinball loss relative to reference")
    ax.legend(fontsize=7)
    ax.grid(alpha=0.3)
    path = dest / "pinball_curves.svg"
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    days = pd.to_datetime(trade_report.cumulative["date"])
    for name in trade_report.cumulative.columns[1:]:
        ax.plot(days, trade_report.cumulative[name], label=name, linewidth=1.2)
    ax.set_xlabel("date")
    ax.set_ylabel("cumulative profit (EUR)")
    ax.legend(fontsize=7)
    ax.grid(alpha=0.3)
    fig.autofmt_xdate()
    path = dest / "cumulative_profit.svg"
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    written.append(path)
    return written
