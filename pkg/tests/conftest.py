"""Shared synthetic-data generators for the test suite.

All generators are deterministic given an explicit numpy Generator; tests
create their own with literal seeds so every run is reproducible.
"""

from __future__ import annotations

import numpy as np
import pytest

from quantens.data import HOURS, N_QUANTILES, ExpertPanel, ForecastPanel, PriceSeries


def day_range(n_days: int, start: str = "2020-01-01") -> np.ndarray:
    return np.datetime64(start) + np.arange(n_days)


def make_prices(
    rng: np.random.Generator,
    n_days: int,
    base: float = 40.0,
    swing: float = 15.0,
    noise: float = 4.0,
    start: str = "2020-01-01",
) -> PriceSeries:
    """Spiky day-ahead price path: a sinusoidal intraday shape (cheap night,
    expensive evening) plus Gaussian noise, so each day has a clearly
    profitable low/high hour pair."""
    shape = base + swing * np.sin((np.arange(HOURS) - 5.0) / HOURS * 2.0 * np.pi)
    values = shape + rng.normal(0.0, noise, size=(n_days, HOURS))
    return PriceSeries(day_range(n_days, start), values)


def curve_around(center: np.ndarray, spread: float) -> np.ndarray:
    """Degenerate-free quantile curves: center (..., 1) plus a linear spread
    over the grid. Returns (..., 99) monotone curves."""
    offsets = np.linspace(-spread, spread, N_QUANTILES)
    return center[..., None] + offsets


def make_expert(
    rng: np.random.Generator,
    prices: PriceSeries,
    name: str,
    bias: float = 0.0,
    noise: float = 2.0,
    spread: float = 8.0,
) -> ForecastPanel:
    """A noisy expert: truth + bias + day/hour noise, linear quantile spread."""
    center = prices.values + bias + rng.normal(0.0, noise, prices.values.shape)
    return ForecastPanel(prices.days, curve_around(center, spread), name=name)


def make_panel(
    rng: np.random.Generator,
    prices: PriceSeries,
    n_experts: int,
    biases: list[float] | None = None,
    noises: list[float] | None = None,
) -> ExpertPanel:
    biases = biases if biases is not None else [0.0] * n_experts
    noises = noises if noises is not None else [2.0] * n_experts
    experts = [
        make_expert(rng, prices, f"expert{k}", biases[k], noises[k])
        for k in range(n_experts)
    ]
    return ExpertPanel.from_panels(experts)


def degenerate_panel(prices: PriceSeries, name: str = "oracle") -> ForecastPanel:
    """Perfect-foresight panel: every percentile equals the realized price."""
    values = np.repeat(prices.values[:, :, None], N_QUANTILES, axis=2)
    return ForecastPanel(prices.days, values, name=name)


@pytest.fixture
def small_prices() -> PriceSeries:
    return make_prices(np.random.default_rng(11), n_days=30)


@pytest.fixture
def small_panel(small_prices) -> ExpertPanel:
    return make_panel(np.random.default_rng(12), small_prices, n_experts=3,
                      biases=[0.0, 2.0, -3.0])
