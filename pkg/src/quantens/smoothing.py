"""Penalized B-spline smoothing of weight curves across the quantile grid.

Raw per-quantile combination weights are noisy; projecting each expert's
99-point weight curve through a cubic B-spline smoother with a second-order
difference penalty trades that noise against flexibility via a single
penalty lambda. Constants pass through every smoother unchanged, so uniform
weights are a fixed point at any lambda.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy.interpolate import BSpline

from .data import N_QUANTILES, PROB_GRID

logger = logging.getLogger(__name__)

DEGREE = 3  # cubic


class SmootherBasis:
    """B-spline basis, difference penalty and cached hat matrices.

    n_basis counts basis functions; the knot vector is clamped at the grid
    endpoints with n_basis - 4 equidistant interior knots. n_basis = 99
    yields a full-rank square basis, so hat(0) is the identity.
    """

    def __init__(self, n_basis: int = 25, probs: np.ndarray = PROB_GRID):
        probs = np.asarray(probs, dtype=np.float64)
        if n_basis < DEGREE + 1:
            raise ValueError(f"need at least {DEGREE + 1} basis functions")
        if n_basis > len(probs):
            raise ValueError("more basis functions than grid points")
        lo, hi = probs[0], probs[-1]
        interior = np.linspace(lo, hi, n_basis - DEGREE + 1)[1:-1]
        knots = np.r_[np.full(DEGREE + 1, lo), interior, np.full(DEGREE + 1, hi)]
        self.n_basis = n_basis
        self.probs = probs
        self.B = BSpline.design_matrix(probs, knots, DEGREE).toarray()
        self.D = np.diff(np.eye(n_basis), n=2, axis=0)
        self.P = self.D.T @ self.D
        self._hats: dict[float, np.ndarray] = {}

    def hat(self, lam: float) -> np.ndarray:
        """Smoother matrix B (B'B + lam * D'D)^-1 B', shape (99, 99).

        Solved as least squares on the stacked system [B; sqrt(lam) D] (QR,
        not normal equations) so the full basis stays accurate at lam = 0.
        """
        lam = float(lam)
        if lam < 0.0:
            raise ValueError("penalty must be non-negative")
        cached = self._hats.get(lam)
        if cached is not None:
            return cached
        n_pts = self.B.shape[0]
        if lam == 0.0:
            a_mat, rhs = self.B, np.eye(n_pts)
        else:
            a_mat = np.vstack([self.B, np.sqrt(lam) * self.D])
            rhs = np.vstack([np.eye(n_pts), np.zeros((self.n_basis - 2, n_pts))])
        coef, *_ = np.linalg.lstsq(a_mat, rhs, rcond=None)
        hat = self.B @ coef
        hat.setflags(write=False)
        self._hats[lam] = hat
        return hat


def _clip_normalize(weights: np.ndarray) -> tuple[np.ndarray, int]:
    """Clip negative weights to zero and renormalize each (hour, quantile)
    row over experts; all-zero rows fall back to uniform. Returns the
    surface and the number of fallback rows."""
    clipped = np.clip(weights, 0.0, None)
    totals = clipped.sum(axis=-1, keepdims=True)
    dead = totals == 0.0
    n_fallback = int(dead.sum())
    safe = np.where(dead, 1.0, totals)
    out = np.where(dead, 1.0 / weights.shape[-1], clipped / safe)
    return out, n_fallback


def smooth_weights(raw: np.ndarray, basis: SmootherBasis, lam: float) -> np.ndarray:
    """Smooth a weight surface across quantiles and restore the convex-
    combination contract.

    raw: (n_hours, 99, n_experts). Each (hour, expert) curve is multiplied by
    hat(lam); negatives are clipped to zero and each (hour, quantile) row is
    renormalized to sum 1. A row losing all mass is replaced by uniform
    weights (logged, not fatal) - unreachable in exact arithmetic because the
    smoother preserves the row-sum-1 property.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 3 or raw.shape[1] != N_QUANTILES:
        raise ValueError(f"weight surface must be (hours, {N_QUANTILES}, experts)")
    smoothed = np.einsum("qr,hrk->hqk", basis.hat(lam), raw)
    out, n_fallback = _clip_normalize(smoothed)
    if n_fallback:
        logger.warning("smoothing zeroed %d weight rows; reset to uniform",
                       n_fallback)
    return out
