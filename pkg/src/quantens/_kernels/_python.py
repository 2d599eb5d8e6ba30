"""Pure-numpy reference implementation of the hot kernels.

Semantics must match ``_core.pyx`` exactly; the test suite cross-checks the
two backends on random inputs.
"""

from __future__ import annotations

import numpy as np


def crps_rows(values: np.ndarray, x: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Pinball-grid CRPS approximation per row.

    values: (n_rows, M) quantile curves; x: (n_rows,) outcomes;
    probs: (M,) probability grid. Returns (n_rows,) with
    (2/M) * sum_i (1{x < v_i} - p_i) * (v_i - x).
    """
    values = np.asarray(values, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    diff = values - x[:, None]
    ql = ((x[:, None] < values) - probs) * diff
    return 2.0 * ql.sum(axis=1) / probs.shape[0]


def _eta(V: np.ndarray, E: np.ndarray, ln_k: float, eta_max: float) -> np.ndarray:
    """Range-adaptive learning rate min(1/(2E), sqrt(ln K / V)); capped while
    no regret has been observed (V = 0)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = np.minimum(1.0 / (2.0 * E), np.sqrt(ln_k / V))
    return np.where(V > 0.0, eta, eta_max)


def boa_day_update(
    R: np.ndarray,
    V: np.ndarray,
    E: np.ndarray,
    experts: np.ndarray,
    combined: np.ndarray,
    x: np.ndarray,
    probs: np.ndarray,
    state_rows: np.ndarray,
    ln_k: float,
    eta_max: float,
) -> None:
    """One day of regret accumulation, hour by hour, in place.

    R/V/E: (n_states, M, K) cumulative corrected regret, squared-regret sum
    and running max |regret|. experts: (H, M, K); combined: (H, M);
    x: (H,); state_rows: (H,) index of the state row each hour updates
    (identity for per-hour learners, all zero when hours are pooled).
    """
    n_hours = combined.shape[0]
    for h in range(n_hours):
        s = int(state_rows[h])
        g = (x[h] < combined[h]) - probs  # pinball subgradient at the mix
        r = g[:, None] * (combined[h][:, None] - experts[h])
        np.maximum(E[s], np.abs(r), out=E[s])
        V[s] += r * r
        eta = _eta(V[s], E[s], ln_k, eta_max)
        R[s] += r * (1.0 - eta * r)


def weights_from_regret(
    R: np.ndarray,
    V: np.ndarray,
    E: np.ndarray,
    ln_w0: np.ndarray,
    ln_k: float,
    eta_max: float,
) -> np.ndarray:
    """Normalized weights proportional to w0 * eta * exp(eta * R), computed in
    the log domain.

    Rows whose every raw weight underflows to zero mass (possible only when
    eta = 0, i.e. a single expert) fall back to uniform.
    """
    eta = _eta(V, E, ln_k, eta_max)
    with np.errstate(divide="ignore"):
        logw = ln_w0 + np.log(eta) + eta * R
    m = logw.max(axis=-1, keepdims=True)
    ok = np.isfinite(m)
    w = np.exp(np.where(ok, logw - np.where(ok, m, 0.0), 0.0))
    total = w.sum(axis=-1, keepdims=True)
    uniform = 1.0 / R.shape[-1]
    return np.where(ok, w / total, uniform)
