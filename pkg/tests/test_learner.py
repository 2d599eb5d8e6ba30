"""Tests for the online CRPS learner.

The core oracle is an independent pure-Python (scalar loops, direct-domain
weights) re-implementation of the whole online loop, checked against
run_online with smoothing disabled.
"""

import math

import numpy as np
import pytest

from quantens.combine import qens_combine
from quantens.data import HOURS, N_QUANTILES, PROB_GRID, ExpertPanel, PriceSeries
from quantens.errors import WeightOverflowError
from quantens.learner import (
    BoaState,
    LambdaTracker,
    LearnerConfig,
    boa_step,
    pinball_subgradient,
    run_online,
    weights_from_state,
)
from quantens.metrics import crps_panel

from conftest import curve_around, day_range, degenerate_panel, make_panel, make_prices


def reference_online_loop(expert_values, price_values, eta_max=1e6):
    """Scalar re-implementation of the unsmoothed online loop.

    expert_values: (K, D, 24, 99); price_values: (D, 24). Emits weights and
    the combined forecast day by day, then updates the regret state against
    the emitted forecast: E <- max(E, |r|), V <- V + r^2,
    eta = min(1/(2E), sqrt(ln K / V)) (eta_max while V == 0),
    R <- R + r (1 - eta r), with weights w0 * eta * exp(eta * R) normalized
    per (hour, quantile). Returns (weights (D,24,99,K), combined (D,24,99)).
    """
    n_experts, n_days = expert_values.shape[0], expert_values.shape[1]
    ln_k = math.log(n_experts)
    w0 = 1.0 / n_experts
    R = np.zeros((HOURS, N_QUANTILES, n_experts))
    V = np.zeros_like(R)
    E = np.zeros_like(R)
    weights_out = np.empty((n_days, HOURS, N_QUANTILES, n_experts))
    combined_out = np.empty((n_days, HOURS, N_QUANTILES))

    def eta_of(h, i, k):
        if V[h, i, k] == 0.0:
            return eta_max
        return min(1.0 / (2.0 * E[h, i, k]), math.sqrt(ln_k / V[h, i, k]))

    for d in range(n_days):
        for h in range(HOURS):
            for i in range(N_QUANTILES):
                raw = [w0 * eta_of(h, i, k) * math.exp(eta_of(h, i, k) * R[h, i, k])
                       for k in range(n_experts)]
                total = sum(raw)
                for k in range(n_experts):
                    weights_out[d, h, i, k] = (raw[k] / total) if total > 0.0 \
                        else 1.0 / n_experts
                combined_out[d, h, i] = sum(
                    weights_out[d, h, i, k] * expert_values[k, d, h, i]
                    for k in range(n_experts)
                )
            combined_out[d, h] = np.sort(combined_out[d, h])
        for h in range(HOURS):
            x = price_values[d, h]
            for i in range(N_QUANTILES):
                c = combined_out[d, h, i]
                g = (1.0 if x < c else 0.0) - PROB_GRID[i]
                for k in range(n_experts):
                    r = g * (c - expert_values[k, d, h, i])
                    E[h, i, k] = max(E[h, i, k], abs(r))
                    V[h, i, k] += r * r
                    eta = eta_of(h, i, k)
                    R[h, i, k] += r * (1.0 - eta * r)
    return weights_out, combined_out


class TestPinballSubgradient:
    def test_branches(self):
        assert pinball_subgradient(10.0, 5.0, 0.3) == pytest.approx(0.7)
        assert pinball_subgradient(10.0, 15.0, 0.3) == pytest.approx(-0.3)
        # tie takes the x >= q branch
        assert pinball_subgradient(10.0, 10.0, 0.3) == pytest.approx(-0.3)

    def test_probability_validated(self):
        with pytest.raises(ValueError):
            pinball_subgradient(1.0, 1.0, 1.0)


class TestBoaState:
    def test_fresh_state_gives_uniform_weights(self):
        state = BoaState(4)
        weights = weights_from_state(state)
        assert weights.shape == (HOURS, N_QUANTILES, 4)
        assert np.allclose(weights, 0.25)

    def test_single_expert_weight_is_one(self):
        state = BoaState(1)
        assert np.allclose(weights_from_state(state), 1.0)

    def test_overflow_surfaced(self, monkeypatch):
        import quantens._kernels as kernels

        state = BoaState(2)
        monkeypatch.setattr(
            kernels, "weights_from_regret",
            lambda *args: np.full((HOURS, N_QUANTILES, 2), np.nan),
        )
        with pytest.raises(WeightOverflowError):
            weights_from_state(state)

    def test_single_step_hand_values(self):
        """One observation, degenerate expert curves: every accumulator must
        match the recursion evaluated by hand."""
        state = BoaState(2)
        experts = np.stack([np.full(N_QUANTILES, 30.0),
                            np.full(N_QUANTILES, 50.0)])
        combined = np.full(N_QUANTILES, 40.0)
        boa_step(state, experts, combined, x=35.0, hour=7)
        g = 1.0 - PROB_GRID  # 35 < 40 at every quantile
        r = np.stack([g * (40.0 - 30.0), g * (40.0 - 50.0)], axis=1)
        assert np.allclose(state.E[7], np.abs(r), atol=1e-15)
        assert np.allclose(state.V[7], r * r, atol=1e-15)
        eta = np.minimum(1.0 / (2.0 * np.abs(r)),
                         np.sqrt(math.log(2.0) / (r * r)))
        assert np.allclose(state.R[7], r * (1.0 - eta * r), atol=1e-13)
        # other hour-learners untouched
        mask = np.ones(HOURS, dtype=bool)
        mask[7] = False
        assert np.all(state.R[mask] == 0.0)
        assert np.all(state.V[mask] == 0.0)

    def test_boa_step_moves_weight_toward_better_expert(self):
        """x ~ U(35, 45); the 'good' expert's linear curve is that law's
        exact quantile function, so it should collect nearly all weight."""
        rng = np.random.default_rng(0)
        state = BoaState(2)
        good = curve_around(np.array(40.0), 5.0)
        bad = curve_around(np.array(55.0), 5.0)
        experts = np.stack([good, bad])
        for _ in range(200):
            x = rng.uniform(35.0, 45.0)
            w = weights_from_state(state)[3]
            combined = np.sort(np.einsum("ik,ki->i", w, experts))
            boa_step(state, experts, combined, x, hour=3)
        weights = weights_from_state(state)
        assert np.all(weights[3, :, 0] > 0.9)
        # untouched hours remain uniform
        assert np.allclose(weights[5], 0.5)


class TestReferenceLoopAgreement:
    def test_run_online_matches_scalar_reference(self):
        rng = np.random.default_rng(1)
        prices = make_prices(rng, 12)
        panel = make_panel(rng, prices, 3, biases=[0.0, 4.0, -2.0])
        result = run_online(panel, prices, LearnerConfig(smooth=False))
        ref_weights, ref_combined = reference_online_loop(
            panel.values, prices.values
        )
        assert np.allclose(result.weights, ref_weights, atol=1e-10)
        assert np.allclose(result.panel.values, ref_combined, atol=1e-10)
        assert np.all(np.isnan(result.lambdas))
        assert result.tracker is None

    def test_two_experts_two_days_hand_loop(self):
        rng = np.random.default_rng(2)
        prices = make_prices(rng, 2)
        panel = make_panel(rng, prices, 2, biases=[1.0, -1.0])
        result = run_online(panel, prices, LearnerConfig(smooth=False))
        _, ref_combined = reference_online_loop(panel.values, prices.values)
        # day 1 must be the uniform (equal-weight) combination
        eq = qens_combine(panel).values[0]
        assert np.allclose(result.panel.values[0], eq, atol=1e-12)
        assert np.allclose(result.panel.values[1], ref_combined[1], atol=1e-10)


class TestLambdaTracker:
    def test_median_before_any_update(self):
        tracker = LambdaTracker(tuple(2.0**e for e in range(-5, 6)))
        assert tracker.select() == 1.0  # 2**0, the median of the 11-point grid

    def test_argmin_after_updates(self):
        tracker = LambdaTracker((0.5, 1.0, 2.0))
        tracker.update(np.array([3.0, 1.0, 2.0]))
        assert tracker.select() == 1.0
        tracker.update(np.array([0.1, 3.0, 0.5]))  # cum: 3.1, 4.0, 2.5
        assert tracker.select() == 2.0

    def test_tie_breaks_toward_smaller_lambda(self):
        tracker = LambdaTracker((0.5, 1.0, 2.0))
        tracker.update(np.array([2.0, 2.0, 5.0]))
        assert tracker.select() == 0.5

    def test_update_shape_checked(self):
        tracker = LambdaTracker((0.5, 1.0))
        with pytest.raises(ValueError):
            tracker.update(np.array([1.0, 2.0, 3.0]))


class TestLearnerConfig:
    def test_grid_validation(self):
        with pytest.raises(ValueError):
            LearnerConfig(lambda_grid=())
        with pytest.raises(ValueError):
            LearnerConfig(lambda_grid=(1.0, 0.5))
        with pytest.raises(ValueError):
            LearnerConfig(lambda_grid=(-1.0, 1.0))
        with pytest.raises(ValueError):
            LearnerConfig(eta_max=0.0)

    def test_unsmoothed_config_ignores_grid(self):
        config = LearnerConfig(lambda_grid=(), smooth=False)
        assert config.lambda_grid == ()


class TestRunOnline:
    def test_needs_two_experts(self, small_prices):
        panel = make_panel(np.random.default_rng(3), small_prices, 1)
        with pytest.raises(ValueError, match="2 experts"):
            run_online(panel, small_prices)

    def test_needs_aligned_days(self, small_prices, small_panel):
        other = make_prices(np.random.default_rng(4), small_prices.n_days,
                            start="2021-01-01")
        with pytest.raises(ValueError, match="aligned"):
            run_online(small_panel, other)

    def test_smoothed_run_shapes_and_lambda_grid(self, small_prices, small_panel):
        config = LearnerConfig()
        result = run_online(small_panel, small_prices, config)
        n_days = small_prices.n_days
        assert result.panel.values.shape == (n_days, HOURS, N_QUANTILES)
        assert result.weights.shape == (n_days, HOURS, N_QUANTILES, 3)
        assert np.allclose(result.weights.sum(axis=-1), 1.0, atol=1e-9)
        assert result.lambdas.shape == (n_days,)
        assert set(result.lambdas).issubset(set(config.lambda_grid))
        assert result.lambdas[0] == 1.0  # median of the default grid
        assert result.tracker is not None
        assert result.tracker.n_updates == n_days

    def test_pool_hours_shares_state(self, small_prices, small_panel):
        result = run_online(small_panel, small_prices,
                            LearnerConfig(pool_hours=True))
        assert result.weights.shape == (small_prices.n_days, 1, N_QUANTILES, 3)

    def test_causality_prefix_invariance(self):
        """Perturbing prices after day d leaves forecasts up to day d
        bit-identical."""
        rng = np.random.default_rng(5)
        prices = make_prices(rng, 20)
        panel = make_panel(rng, prices, 3)
        cut = 12
        perturbed_values = prices.values.copy()
        perturbed_values[cut:] += rng.normal(50.0, 30.0,
                                             perturbed_values[cut:].shape)
        perturbed = PriceSeries(prices.days, perturbed_values)
        for config in (LearnerConfig(), LearnerConfig(smooth=False)):
            a = run_online(panel, prices, config)
            b = run_online(panel, perturbed, config)
            assert np.array_equal(a.panel.values[: cut + 1],
                                  b.panel.values[: cut + 1])
            assert np.array_equal(a.weights[: cut + 1], b.weights[: cut + 1])

    def test_tracks_exact_expert(self):
        """With one exact expert (its every percentile equals the realized
        price) the learner's weight on it exceeds 0.99 everywhere within 200
        days, and cumulative CRPS stays within a sqrt(T ln K) band of the
        best expert."""
        rng = np.random.default_rng(6)
        prices = make_prices(rng, 220)
        exact = degenerate_panel(prices, name="exact")
        noisy = make_panel(rng, prices, 1, biases=[5.0], noises=[6.0])
        panel = ExpertPanel.from_panels([exact, noisy.expert("expert0")])
        result = run_online(panel, prices, LearnerConfig(smooth=False))
        final_weights = result.weights[199]  # day index 199 = 200th day
        assert np.all(final_weights[:, :, 0] >= 0.99)

        learner_crps = crps_panel(result.panel, prices).sum()
        best_crps = min(
            crps_panel(panel.expert(n), prices).sum() for n in panel.names
        )
        t = prices.n_days
        bound = best_crps + 40.0 * math.sqrt(t * math.log(2))
        assert learner_crps <= bound

    def test_smoothing_on_vs_off_differ(self, small_prices, small_panel):
        on = run_online(small_panel, small_prices, LearnerConfig())
        off = run_online(small_panel, small_prices, LearnerConfig(smooth=False))
        assert not np.allclose(on.weights, off.weights)
