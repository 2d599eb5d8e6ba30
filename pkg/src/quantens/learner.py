"""Online CRPS learning: per-quantile expert aggregation with adaptive
learning rates, penalized smoothing of the weight curves and online
selection of the smoothing penalty.

Daily cycle: derive weights from accumulated regret, emit the combined
forecast for the currently selected penalty, then - once the day's prices
are known - score every penalty candidate, re-select the penalty and update
the regret state. The forecast for day d therefore never sees prices beyond
day d - 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .combine import combine_panel_day
from .data import HOURS, N_QUANTILES, PROB_GRID, ExpertPanel, ForecastPanel, PriceSeries
from .errors import NonFiniteError, WeightOverflowError
from .smoothing import SmootherBasis, _clip_normalize

DEFAULT_LAMBDA_GRID = tuple(2.0**e for e in range(-5, 6))
DEFAULT_ETA_MAX = 1e6


def pinball_subgradient(q, x, p):
    """Subgradient 1{x < q} - p of the pinball loss with respect to the
    quantile forecast q. The tie x = q takes the x >= q branch (indicator 0),
    so the result is -p there. Vectorized."""
    q = np.asarray(q, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("probability level must lie in (0, 1)")
    out = (x < q) - p
    return out if out.ndim else float(out)


@dataclass
class LearnerConfig:
    """Hyperparameters of the online learner.

    lambda_grid: candidate smoothing penalties, ascending.
    n_basis: B-spline basis size for weight smoothing.
    eta_max: learning-rate cap used until the first nonzero regret.
    pool_hours: share one weight vector across all 24 hours instead of
        running 24 independent hourly learners.
    smooth: disable to aggregate with raw (unsmoothed) weights; the lambda
        machinery is then skipped entirely.
    """

    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    n_basis: int = 25
    eta_max: float = DEFAULT_ETA_MAX
    pool_hours: bool = False
    smooth: bool = True

    def __post_init__(self):
        grid = tuple(float(v) for v in self.lambda_grid)
        if self.smooth:
            if not grid:
                raise ValueError("lambda grid must not be empty")
            if any(v < 0 for v in grid):
                raise ValueError("penalties must be non-negative")
            if list(grid) != sorted(grid) or len(set(grid)) != len(grid):
                raise ValueError("lambda grid must be strictly increasing")
        self.lambda_grid = grid
        if self.eta_max <= 0:
            raise ValueError("eta_max must be positive")


class BoaState:
    """Per-(hour, quantile, expert) regret accumulators.

    R holds cumulative corrected regret, V the cumulative squared
    instantaneous regret and E the running max |instantaneous regret|; all
    start at zero and V, E never decrease (no forgetting). w0 is the uniform
    prior weight; t counts processed days.
    """

    def __init__(self, n_experts: int, n_state_rows: int = HOURS):
        if n_experts < 1:
            raise ValueError("need at least one expert")
        shape = (n_state_rows, N_QUANTILES, n_experts)
        self.R = np.zeros(shape)
        self.V = np.zeros(shape)
        self.E = np.zeros(shape)
        self.w0 = np.full(n_experts, 1.0 / n_experts)
        self.t = 0

    @property
    def n_experts(self) -> int:
        return self.R.shape[-1]

    @property
    def n_state_rows(self) -> int:
        return self.R.shape[0]

    def state_row(self, hour: int) -> int:
        """Map a 0-based hour to its state row (0 when hours are pooled)."""
        if not 0 <= hour < HOURS:
            raise ValueError(f"hour must be in 0..{HOURS - 1}")
        return 0 if self.n_state_rows == 1 else hour


def boa_step(
    state: BoaState,
    expert_curves: np.ndarray,
    combined: np.ndarray,
    x: float,
    hour: int,
    eta_max: float = DEFAULT_ETA_MAX,
) -> BoaState:
    """One observation's regret update for one hour-learner, in place.

    For each quantile i and expert k, with g the pinball subgradient at the
    combined forecast: r = g * (combined[i] - expert_k[i]); E <- max(E, |r|);
    V <- V + r^2; eta = min(1/(2E), sqrt(ln K / V)) (capped at eta_max while
    V = 0); R <- R + r * (1 - eta * r). The day counter t is left to the
    caller, which increments it once per day after all hours.
    """
    expert_curves = np.ascontiguousarray(expert_curves, dtype=np.float64)
    combined = np.ascontiguousarray(combined, dtype=np.float64)
    if expert_curves.shape != (state.n_experts, N_QUANTILES):
        raise ValueError("expert_curves must be (n_experts, 99)")
    if combined.shape != (N_QUANTILES,):
        raise ValueError("combined must have 99 values")
    if not (np.isfinite(expert_curves).all() and np.isfinite(combined).all()
            and np.isfinite(x)):
        raise NonFiniteError("boa_step requires finite inputs")
    _kernels.boa_day_update(
        state.R, state.V, state.E,
        np.ascontiguousarray(expert_curves.T)[None, :, :],  # (1, 99, K)
        combined[None, :],
        np.array([float(x)]),
        PROB_GRID,
        np.array([state.state_row(hour)], dtype=np.intp),
        float(np.log(state.n_experts)),
        float(eta_max),
    )
    return state


def weights_from_state(state: BoaState, eta_max: float = DEFAULT_ETA_MAX) -> np.ndarray:
    """Weights proportional to w0 * eta * exp(eta * R), normalized per
    (hour, quantile). Computed in the log domain; a fresh state yields
    uniform 1/K everywhere. Shape (n_state_rows, 99, n_experts)."""
    w = _kernels.weights_from_regret(
        state.R, state.V, state.E, np.log(state.w0),
        float(np.log(state.n_experts)), float(eta_max),
    )
    if not np.isfinite(w).all():
        s, q, k = np.argwhere(~np.isfinite(w))[0]
        raise WeightOverflowError(
            f"non-finite weight at state row {s}, quantile {q + 1}, expert {k}"
        )
    return w


@dataclass
class LambdaTracker:
    """Cumulative CRPS per smoothing-penalty candidate.

    Selection is the argmin of cumulative CRPS with ties broken toward the
    smaller penalty; before any update the median grid value is returned.
    """

    grid: tuple[float, ...]
    cum_crps: np.ndarray = field(init=False)
    n_updates: int = field(init=False, default=0)

    def __post_init__(self):
        self.grid = tuple(float(v) for v in self.grid)
        if not self.grid:
            raise ValueError("lambda grid must not be empty")
        if list(self.grid) != sorted(self.grid):
            raise ValueError("lambda grid must be ascending")
        self.cum_crps = np.zeros(len(self.grid))

    def update(self, daily_crps: np.ndarray) -> None:
        daily_crps = np.asarray(daily_crps, dtype=np.float64)
        if daily_crps.shape != (len(self.grid),):
            raise ValueError("need one CRPS value per candidate")
        self.cum_crps += daily_crps
        self.n_updates += 1

    def select_index(self) -> int:
        if self.n_updates == 0:
            return len(self.grid) // 2
        return int(np.argmin(self.cum_crps))  # first minimum = smallest lambda

    def select(self) -> float:
        return self.grid[self.select_index()]


def select_lambda(tracker: LambdaTracker) -> float:
    """Currently active smoothing penalty (see LambdaTracker.select)."""
    return tracker.select()


@dataclass(frozen=True)
class OnlineResult:
    """Output of one online-learning run.

    weights: emitted combination weights per day,
        shape (n_days, n_state_rows, 99, n_experts).
    lambdas: active penalty per day (NaN when smoothing is off).
    """

    panel: ForecastPanel
    weights: np.ndarray
    lambdas: np.ndarray
    tracker: LambdaTracker | None
    state: BoaState
    n_uniform_fallbacks: int = 0


def run_online(
    panel: ExpertPanel,
    prices: PriceSeries,
    config: LearnerConfig | None = None,
    name: str = "CRPS",
) -> OnlineResult:
    """Run the online CRPS learner over an aligned panel/price pair.

    Per day: (1) derive raw weights from the regret state; (2) smooth them
    with every candidate penalty and build each candidate's combined
    forecast; (3) emit the candidate of the currently active penalty;
    (4) after observing the day's 24 prices, add each candidate's daily CRPS
    to its cumulative score, re-select the active penalty and update the
    regret state against the emitted forecast. No burn-in is discarded.
    """
    config = config or LearnerConfig()
    if panel.n_experts < 2:
        raise ValueError("online learning needs at least 2 experts")
    if panel.n_days != prices.n_days or np.any(panel.days != prices.days):
        raise ValueError("panel and prices must be aligned to the same days")

    n_days, n_experts = panel.n_days, panel.n_experts
    n_rows = 1 if config.pool_hours else HOURS
    state = BoaState(n_experts, n_rows)
    state_rows = np.zeros(HOURS, dtype=np.intp) if config.pool_hours \
        else np.arange(HOURS, dtype=np.intp)
    ln_k = float(np.log(n_experts))

    tracker: LambdaTracker | None = None
    hats = np.empty(0)
    if config.smooth:
        basis = SmootherBasis(config.n_basis)
        hats = np.stack([basis.hat(lam) for lam in config.lambda_grid])
        tracker = LambdaTracker(config.lambda_grid)

    combined_all = np.empty((n_days, HOURS, N_QUANTILES))
    weight_hist = np.empty((n_days, n_rows, N_QUANTILES, n_experts))
    lambda_hist = np.full(n_days, np.nan)
    n_fallback = 0

    for d in range(n_days):
        raw = weights_from_state(state, config.eta_max)
        day_curves = panel.values[:, d]  # (K, 24, 99)

        if config.smooth:
            assert tracker is not None
            active = tracker.select_index()
            # all candidates at once: (C,1,99,99) @ (1,24,99,K) -> (C,24,99,K)
            w_cand, n_dead = _clip_normalize(np.matmul(hats[:, None], raw[None]))
            n_fallback += n_dead
            cand_combined = np.sort(
                np.einsum("chqk,hqk->chq", w_cand,
                          day_curves.transpose(1, 2, 0)),
                axis=-1,
            )
            emitted_w = w_cand[active]
            emitted = cand_combined[active]
            lambda_hist[d] = config.lambda_grid[active]
        else:
            emitted_w = raw
            emitted = combine_panel_day(day_curves, raw)

        combined_all[d] = emitted
        weight_hist[d] = emitted_w

        # end of day: observe prices, score candidates, update regret
        x = prices.values[d]
        if config.smooth:
            flat = cand_combined.reshape(-1, N_QUANTILES)
            scores = _kernels.crps_rows(
                flat, np.tile(x, len(config.lambda_grid)), PROB_GRID
            )
            tracker.update(scores.reshape(-1, HOURS).sum(axis=1))
        _kernels.boa_day_update(
            state.R, state.V, state.E,
            np.ascontiguousarray(day_curves.transpose(1, 2, 0)),  # (24, 99, K)
            emitted, x, PROB_GRID, state_rows, ln_k, config.eta_max,
        )
        state.t += 1

    return OnlineResult(
        panel=ForecastPanel(panel.days, combined_all, name=name),
        weights=weight_hist,
        lambdas=lambda_hist,
        tracker=tracker,
        state=state,
        n_uniform_fallbacks=n_fallback,
    )
