"""Scoring of probabilistic and point forecasts, and DM significance tests.

The CRPS of a 99-percentile forecast is approximated by twice the mean
pinball loss over the probability grid; for a point-mass curve this equals
the absolute error, so CRPS tables and MAE columns are directly comparable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import pandas as pd
from scipy.stats import norm

from ._kernels import crps_rows
from .data import MEDIAN_IDX, N_QUANTILES, PROB_GRID, ForecastPanel, PriceSeries
from .errors import CoverageError, DegenerateDifferentialError


def quantile_loss(q, x, p):
    """Pinball loss (1{x < q} - p) * (q - x) for a quantile forecast q of
    outcome x at probability p. Ties x = q score zero. Vectorized.
    """
    q = np.asarray(q, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("probability level must lie in (0, 1)")
    out = ((x < q) - p) * (q - x)
    return out if out.ndim else float(out)


def crps_approx(curve: np.ndarray, x: float) -> float:
    """CRPS of one 99-percentile curve against outcome x: (2/99) * sum of
    pinball losses over the grid."""
    curve = np.asarray(curve, dtype=np.float64)
    if curve.shape != (N_QUANTILES,):
        raise ValueError(f"curve must have {N_QUANTILES} values")
    return float(crps_rows(curve[None, :], np.array([x]), PROB_GRID)[0])


def _check_aligned(panel: ForecastPanel, prices: PriceSeries) -> None:
    if panel.n_days == 0 or prices.n_days == 0:
        raise CoverageError("empty overlap between forecasts and prices")
    if panel.n_days != prices.n_days or np.any(panel.days != prices.days):
        raise CoverageError(
            "forecast panel and prices cover different days; align them first"
        )


def crps_panel(panel: ForecastPanel, prices: PriceSeries) -> np.ndarray:
    """Per-observation CRPS loss panel, shape (n_days, 24)."""
    _check_aligned(panel, prices)
    n = panel.n_days
    flat = crps_rows(
        panel.values.reshape(n * 24, N_QUANTILES), prices.values.reshape(-1), PROB_GRID
    )
    return flat.reshape(n, 24)


def pinball_by_quantile(panel: ForecastPanel, prices: PriceSeries) -> np.ndarray:
    """Mean pinball loss per percentile over the whole panel, shape (99,)."""
    _check_aligned(panel, prices)
    q = panel.values.reshape(-1, N_QUANTILES)
    x = prices.values.reshape(-1)[:, None]
    return quantile_loss(q, x, PROB_GRID).mean(axis=0)


def mae_median(panel: ForecastPanel, prices: PriceSeries) -> float:
    """Mean absolute error of the median (50th percentile) forecast."""
    _check_aligned(panel, prices)
    return float(np.abs(panel.values[:, :, MEDIAN_IDX] - prices.values).mean())


def rmse_mean(panel: ForecastPanel, prices: PriceSeries) -> float:
    """RMSE of the distribution mean, estimated as the unweighted average of
    the 99 percentile values."""
    _check_aligned(panel, prices)
    err = panel.values.mean(axis=2) - prices.values
    return float(np.sqrt(np.mean(err * err)))


@dataclass(frozen=True)
class DmResult:
    """Two one-sided DM tests on a daily loss differential.

    ``p_better`` is the p-value for "A beats B" (small when A's losses are
    clearly lower), ``p_worse`` the reverse; the two always sum to 1 under
    the continuous normal reference.
    """

    stat: float
    p_better: float
    p_worse: float
    n_days: int


def dm_test(loss_a: np.ndarray, loss_b: np.ndarray) -> DmResult:
    """Multivariate Diebold-Mariano test on (n_days, 24) loss panels.

    The daily differential is the difference of L1 norms of the 24-hour loss
    vectors (a plain sum for non-negative losses); the statistic is
    sqrt(n) * mean / sd with a standard-normal reference and no
    autocorrelation correction.
    """
    loss_a = np.asarray(loss_a, dtype=np.float64)
    loss_b = np.asarray(loss_b, dtype=np.float64)
    if loss_a.shape != loss_b.shape or loss_a.ndim != 2:
        raise ValueError("loss panels must share one (n_days, 24) shape")
    if not (np.isfinite(loss_a).all() and np.isfinite(loss_b).all()):
        raise ValueError("loss panels must be finite")
    n = loss_a.shape[0]
    if n < 2:
        raise ValueError("need at least 2 days for a DM test")
    if n < 30:
        warnings.warn(f"DM test on only {n} days; normal reference is rough",
                      stacklevel=2)
    delta = loss_a.sum(axis=1) - loss_b.sum(axis=1)
    sd = delta.std(ddof=1)
    if sd == 0.0:
        raise DegenerateDifferentialError(
            "degenerate differential: identical loss series"
        )
    stat = float(np.sqrt(n) * delta.mean() / sd)
    p_better = float(norm.cdf(stat))
    return DmResult(stat=stat, p_better=p_better, p_worse=1.0 - p_better, n_days=n)


def dm_matrix(losses: Mapping[str, np.ndarray]) -> pd.DataFrame:
    """Pairwise one-sided DM p-values.

    Cell (row r, column c) is the p-value that model c's forecasts are
    significantly better than model r's. Diagonal and degenerate pairs are
    NaN (incomparable).
    """
    names = list(losses)
    out = pd.DataFrame(np.nan, index=names, columns=names, dtype=float)
    for r in names:
        for c in names:
            if r == c:
                continue
            try:
                out.loc[r, c] = dm_test(losses[c], losses[r]).p_better
            except DegenerateDifferentialError:
                pass
    return out
