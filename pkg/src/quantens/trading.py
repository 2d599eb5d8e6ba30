"""Day-ahead battery arbitrage backtest.

A 2 MWh battery (one-way efficiency 0.9) trades 1 MWh blocks on the
day-ahead auction. Each day the median forecast picks a buy hour h1 and a
later sell hour h2; limit prices come from the forecast quantiles at risk
level alpha. A battery at an end stop additionally schedules an unlimited
forced order at an hour h_star so the main pair stays feasible. Orders are
settled against realized prices with inclusive limit semantics.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd

from .data import HOURS, N_QUANTILES, ForecastPanel, PriceSeries

EFFICIENCY = 0.9
INV_EFFICIENCY = 1.0 / EFFICIENCY
CAPACITY = 2
INITIAL_LEVEL = 1

PROFIT_CHECKS = ("worst_case", "median")


@dataclass(frozen=True)
class RiskConfig:
    """Risk appetite alpha and the profitability-check variant.

    The limit orders use the bounds of the central alpha prediction
    interval: q = (1 - alpha)/2, buy limit at quantile 1 - q, sell limit at
    quantile q. 100*q must land on the percentile grid (alpha = 0.5 .. 0.98
    in steps of 0.02); off-grid alphas are rejected, not interpolated.

    profit_check selects which forecast prices must clear a profit before
    limit orders are placed: "worst_case" uses the limit prices themselves,
    "median" uses the median forecast at h1/h2.
    """

    alpha: float = 0.5
    profit_check: str = "worst_case"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        q100 = 100.0 * (1.0 - self.alpha) / 2.0
        if abs(q100 - round(q100)) > 1e-9 or not 1 <= round(q100) <= 49:
            raise ValueError(
                f"alpha={self.alpha} puts the interval bounds off the "
                "percentile grid; 100*(1-alpha)/2 must be an integer in 1..49"
            )
        if self.profit_check not in PROFIT_CHECKS:
            raise ValueError(f"profit_check must be one of {PROFIT_CHECKS}")

    @property
    def q(self) -> float:
        return (1.0 - self.alpha) / 2.0

    @property
    def lower_idx(self) -> int:
        """0-based grid index of quantile q (sell limit)."""
        return int(round(100.0 * self.q)) - 1

    @property
    def upper_idx(self) -> int:
        """0-based grid index of quantile 1 - q (buy limit)."""
        return N_QUANTILES - 1 - self.lower_idx


@dataclass(frozen=True)
class DayPlan:
    """One day's order schedule. Hours are 1-based (1..24)."""

    h1: int
    h2: int
    h_star: int | None
    forced_kind: str  # none | buy | sell
    buy_limit: float
    sell_limit: float
    trade_flag: bool

    def __post_init__(self):
        if not (1 <= self.h1 < self.h2 <= HOURS):
            raise ValueError("plan requires 1 <= h1 < h2 <= 24")
        if self.forced_kind == "none":
            if self.h_star is not None:
                raise ValueError("h_star must be None without a forced order")
        elif self.forced_kind == "buy":
            if self.h_star is None or not 1 <= self.h_star < self.h2:
                raise ValueError("forced buy requires h_star < h2")
        elif self.forced_kind == "sell":
            if self.h_star is None or not 1 <= self.h_star < self.h1:
                raise ValueError("forced sell requires h_star < h1")
        else:
            raise ValueError("forced_kind must be none, buy or sell")


class DayOutcome(NamedTuple):
    cash: float
    n_trades: int
    battery_end: int
    buy_executed: bool
    sell_executed: bool


def _pair_objective(medians: np.ndarray) -> np.ndarray:
    """(24, 24) array of -(1/0.9)*m[h1] + 0.9*m[h2] for every hour pair."""
    return -INV_EFFICIENCY * medians[:, None] + EFFICIENCY * medians[None, :]


def plan_day(
    median_curve: np.ndarray,
    quantile_panel: np.ndarray,
    battery_level: int,
    risk: RiskConfig,
) -> DayPlan:
    """Choose (h1, h2, h_star) by exhaustive search over feasible hour
    tuples, maximizing the expected profit at the median forecast:

        -(1/0.9)*m[h1] + 0.9*m[h2]  - 1{B=0}*(1/0.9)*m[h_star]
                                    + 1{B=2}*0.9*m[h_star]

    subject to h1 < h2 and, when forced, h_star < h2 (buy) or h_star < h1
    (sell). Ties break toward the lexicographically earliest (h1, h2,
    h_star). The plan is always well-defined; trade_flag may be False.
    """
    m = np.asarray(median_curve, dtype=np.float64)
    qp = np.asarray(quantile_panel, dtype=np.float64)
    if m.shape != (HOURS,):
        raise ValueError("median_curve must have 24 hourly values")
    if qp.shape != (HOURS, N_QUANTILES):
        raise ValueError("quantile_panel must be (24, 99)")
    if battery_level not in (0, 1, 2):
        raise ValueError("battery level must be 0, 1 or 2")

    hours = np.arange(HOURS)
    pair_ok = hours[:, None] < hours[None, :]
    base = _pair_objective(m)

    if battery_level == INITIAL_LEVEL:
        obj = np.where(pair_ok, base, -np.inf)
        # np.argmax returns the first flat C-order hit: earliest (h1, h2)
        h1, h2 = np.unravel_index(np.argmax(obj), obj.shape)
        h_star, forced_kind = None, "none"
    else:
        if battery_level == 0:
            forced_kind = "buy"
            obj = base[:, :, None] - INV_EFFICIENCY * m[None, None, :]
            feasible = pair_ok[:, :, None] & (
                hours[None, None, :] < hours[None, :, None]  # h_star < h2
            )
        else:
            forced_kind = "sell"
            obj = base[:, :, None] + EFFICIENCY * m[None, None, :]
            feasible = pair_ok[:, :, None] & (
                hours[None, None, :] < hours[:, None, None]  # h_star < h1
            )
        obj = np.where(feasible, obj, -np.inf)
        h1, h2, hs = np.unravel_index(np.argmax(obj), obj.shape)
        h_star = int(hs) + 1

    buy_limit = float(qp[h1, risk.upper_idx])
    sell_limit = float(qp[h2, risk.lower_idx])
    if risk.profit_check == "worst_case":
        margin = -INV_EFFICIENCY * buy_limit + EFFICIENCY * sell_limit
    else:
        margin = float(base[h1, h2])
    return DayPlan(
        h1=int(h1) + 1,
        h2=int(h2) + 1,
        h_star=h_star,
        forced_kind=forced_kind,
        buy_limit=buy_limit,
        sell_limit=sell_limit,
        trade_flag=bool(margin > 0.0),
    )


def execute_day(plan: DayPlan, actual: np.ndarray, battery_level: int) -> DayOutcome:
    """Settle one day's orders against realized prices.

    The forced order (if any) always executes at market price. Limit orders
    are placed only when trade_flag is set; the buy executes iff
    actual[h1] <= buy_limit, the sell iff actual[h2] >= sell_limit
    (inclusive). Every executed order counts as one trade. The plan's
    feasibility constraints keep the battery level in {0, 1, 2}.
    """
    actual = np.asarray(actual, dtype=np.float64)
    if actual.shape != (HOURS,):
        raise ValueError("actual must have 24 hourly prices")
    expected = {"none": 1, "buy": 0, "sell": 2}[plan.forced_kind]
    if battery_level != expected:
        raise ValueError(
            f"plan with forced_kind={plan.forced_kind!r} is inconsistent "
            f"with battery level {battery_level}"
        )

    cash, trades, level = 0.0, 0, battery_level
    if plan.forced_kind == "buy":
        cash -= INV_EFFICIENCY * actual[plan.h_star - 1]
        level += 1
        trades += 1
    elif plan.forced_kind == "sell":
        cash += EFFICIENCY * actual[plan.h_star - 1]
        level -= 1
        trades += 1

    buy_executed = sell_executed = False
    if plan.trade_flag:
        if actual[plan.h1 - 1] <= plan.buy_limit:
            cash -= INV_EFFICIENCY * actual[plan.h1 - 1]
            level += 1
            trades += 1
            buy_executed = True
        if actual[plan.h2 - 1] >= plan.sell_limit:
            cash += EFFICIENCY * actual[plan.h2 - 1]
            level -= 1
            trades += 1
            sell_executed = True
    return DayOutcome(float(cash), trades, level, buy_executed, sell_executed)


LEDGER_COLUMNS = [
    "date", "h1", "h2", "h_star", "forced_kind", "buy_limit", "sell_limit",
    "buy_exec", "sell_exec", "cash", "battery_end",
]


@dataclass(frozen=True)
class TradeLedger:
    """Per-day trading records plus aggregate totals."""

    frame: pd.DataFrame
    total_profit: float
    n_trades: int

    @property
    def profit_per_trade(self) -> float:
        return self.total_profit / self.n_trades if self.n_trades else float("nan")

    def cumulative_profit(self) -> np.ndarray:
        return self.frame["cash"].to_numpy().cumsum()

    def to_csv(self, path: str | Path) -> None:
        self.frame.to_csv(path, index=False)


def run_strategy(
    forecasts: ForecastPanel, prices: PriceSeries, risk: RiskConfig
) -> TradeLedger:
    """Sequential daily plan/execute loop from a half-charged battery."""
    if forecasts.n_days != prices.n_days or np.any(forecasts.days != prices.days):
        raise ValueError("forecasts and prices must cover the same days")
    medians = forecasts.median()
    level = INITIAL_LEVEL
    rows = []
    for d in range(forecasts.n_days):
        plan = plan_day(medians[d], forecasts.values[d], level, risk)
        outcome = execute_day(plan, prices.values[d], level)
        rows.append({
            "date": str(forecasts.days[d]),
            "h1": plan.h1,
            "h2": plan.h2,
            "h_star": plan.h_star if plan.h_star is not None else pd.NA,
            "forced_kind": plan.forced_kind,
            "buy_limit": plan.buy_limit,
            "sell_limit": plan.sell_limit,
            "buy_exec": int(outcome.buy_executed),
            "sell_exec": int(outcome.sell_executed),
            "cash": outcome.cash,
            "battery_end": outcome.battery_end,
        })
        level = outcome.battery_end
    frame = pd.DataFrame(rows, columns=LEDGER_COLUMNS)
    frame["h_star"] = frame["h_star"].astype("Int64")
    return TradeLedger(
        frame=frame,
        total_profit=float(frame["cash"].sum()),
        n_trades=int(frame["buy_exec"].sum() + frame["sell_exec"].sum()
                     + (frame["forced_kind"] != "none").sum()),
    )


def _daily_pair_extremes(prices: PriceSeries) -> tuple[np.ndarray, np.ndarray]:
    """Per-day best and worst -(1/0.9)*P[h1] + 0.9*P[h2] over h1 < h2."""
    p = prices.values
    pair = -INV_EFFICIENCY * p[:, :, None] + EFFICIENCY * p[:, None, :]
    ok = np.triu(np.ones((HOURS, HOURS), dtype=bool), k=1)
    best = np.where(ok, pair, -np.inf).max(axis=(1, 2))
    worst = np.where(ok, pair, np.inf).min(axis=(1, 2))
    return best, worst


def crystal_ball(prices: PriceSeries) -> float:
    """Perfect-foresight benchmark: every day, unconditionally buy at the
    hour pair h1 < h2 maximizing -(1/0.9)*P[h1] + 0.9*P[h2] (battery stays
    at 1). Returns the total over the period in EUR."""
    best, _ = _daily_pair_extremes(prices)
    return float(best.sum())


def worst_case(prices: PriceSeries) -> float:
    """As crystal_ball with the minimizing hour pair: the loss from taking
    the worst possible decisions every day."""
    _, worst = _daily_pair_extremes(prices)
    return float(worst.sum())


def naive_fixed(prices: PriceSeries, h_buy: int = 3, h_sell: int = 19) -> float:
    """Unconditional daily buy at h_buy and sell at h_sell (1-based hours)."""
    if not (1 <= h_buy < h_sell <= HOURS):
        raise ValueError("need 1 <= h_buy < h_sell <= 24")
    p = prices.values
    daily = -INV_EFFICIENCY * p[:, h_buy - 1] + EFFICIENCY * p[:, h_sell - 1]
    return float(daily.sum())
