"""Horizontal (quantile-space) combination of expert forecast curves.

Each percentile of the combined forecast is a weighted average of the
experts' values at the same percentile. Probability-space (CDF) mixing is
deliberately not offered: averaging quantiles keeps the result sharp and
unimodal, and every downstream consumer expects a valid quantile function.
"""

from __future__ import annotations

import numpy as np

from .data import HOURS, N_QUANTILES, ExpertPanel, ForecastPanel
from .errors import NonFiniteError

WEIGHT_SUM_TOL = 1e-10


def rearrange(curve: np.ndarray) -> np.ndarray:
    """Sort a quantile curve ascending so it is a valid quantile function.

    Preserves the multiset of values; the identity on already sorted input.
    """
    curve = np.asarray(curve, dtype=np.float64)
    if not np.isfinite(curve).all():
        raise NonFiniteError("cannot rearrange a curve with non-finite values")
    return np.sort(curve, axis=-1)


def horizontal_average(curves: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Combine expert curves quantile-by-quantile under per-quantile weights.

    Parameters
    ----------
    curves : (n_experts, 99) array
        One quantile curve per expert.
    weights : (99, n_experts) array
        Row i holds the weights for percentile i; each row must sum to 1.

    Returns the combined 99-curve, rearranged to monotone. A convex
    combination of monotone curves is already monotone, but weights coming
    out of smoothing are re-sorted anyway so the output is always a valid
    quantile function.
    """
    curves = np.asarray(curves, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if curves.ndim != 2 or curves.shape[0] == 0:
        raise ValueError("need at least one expert curve")
    if weights.shape != (curves.shape[1], curves.shape[0]):
        raise ValueError(
            f"weights shape {weights.shape} does not match "
            f"{curves.shape[0]} experts x {curves.shape[1]} quantiles"
        )
    row_sums = weights.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > WEIGHT_SUM_TOL):
        bad = int(np.argmax(np.abs(row_sums - 1.0)))
        raise ValueError(
            f"weight row {bad} sums to {row_sums[bad]!r}, expected 1"
        )
    combined = np.einsum("ik,ki->i", weights, curves)
    return rearrange(combined)


def combine_panel_day(day_curves: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Combine one day of expert curves under an hour x quantile x expert
    weight block.

    day_curves: (n_experts, 24, 99); weights: (24, 99, n_experts) or
    (1, 99, n_experts) to share one weight surface across hours.
    Returns (24, 99), each hourly curve sorted.
    """
    if weights.shape[0] == 1 and day_curves.shape[1] != 1:
        weights = np.broadcast_to(weights, (day_curves.shape[1],) + weights.shape[1:])
    combined = np.einsum("hik,khi->hi", weights, day_curves)
    return np.sort(combined, axis=-1)


def qens_combine(panel: ExpertPanel, name: str = "qEns") -> ForecastPanel:
    """Equal-weight horizontal combination of a whole expert panel.

    Every (day, hour, quantile) cell gets weight 1/K. With a single expert
    this is the identity.
    """
    combined = panel.values.mean(axis=0)
    combined = np.sort(combined, axis=-1)
    return ForecastPanel(panel.days, combined, name=name)


def equal_weight_surface(n_experts: int, n_hours: int = HOURS) -> np.ndarray:
    """Uniform weight surface of shape (n_hours, 99, n_experts)."""
    return np.full((n_hours, N_QUANTILES, n_experts), 1.0 / n_experts)
