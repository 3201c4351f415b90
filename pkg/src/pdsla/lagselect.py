"""Lag-length upper bound from univariate autoregressions.

Each series gets an AR(p) fit by least squares for ``p = 1 .. p_max`` on the
same estimation window (the last ``T - p_max`` observations), and ``p`` is
chosen to minimize::

    IC*(p) = sum_i log(omega_i(p)) + C * p * K / n

with ``omega_i`` the residual variance of series ``i``, ``n = T - p_max`` and
``C = log(n)`` (BIC*) or ``2`` (AIC*). The sum of logs is the log determinant
of the diagonal residual covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from pdsla.errors import TooShortSample, UsageError
from pdsla.lags import lag_block
from pdsla.panel import Panel
from pdsla.regress import ols

DEFAULT_P_MAX = 10


@dataclass
class LagSelection:
    p_chosen: int
    criterion: str
    scores: np.ndarray  # IC*(p) for p = 1..p_max
    per_series_sigma2: np.ndarray  # K x p_max
    n_obs: int

    def recompute_scores(self) -> np.ndarray:
        K, p_max = self.per_series_sigma2.shape
        penalty = penalty_constant(self.criterion, self.n_obs)
        p = np.arange(1, p_max + 1)
        return np.log(self.per_series_sigma2).sum(axis=0) + penalty * p * K / self.n_obs


def penalty_constant(criterion: str, n: int) -> float:
    criterion = criterion.lower()
    if criterion == "bic":
        return math.log(n)
    if criterion == "aic":
        return 2.0
    raise UsageError(f"criterion must be 'aic' or 'bic', got {criterion!r}")


def ar_residual_variances(series: np.ndarray, p_max: int, intercept: bool = False) -> np.ndarray:
    """Residual variance (SSR / n) of AR(1) .. AR(p_max) fits on the common window."""
    series = np.asarray(series, dtype=float)
    rows = np.arange(p_max, series.shape[0])
    n = rows.shape[0]
    y = series[rows]
    lags = lag_block(series, 1, p_max, rows)
    out = np.empty(p_max)
    for p in range(1, p_max + 1):
        X = lags[:, :p]
        if intercept:
            X = np.hstack([np.ones((n, 1)), X])
        out[p - 1] = ols(X, y).ssr / n
    return out


def select_lag(panel: Panel, p_max: int = DEFAULT_P_MAX, criterion: str = "bic", intercept: bool = False) -> LagSelection:
    if p_max < 1:
        raise UsageError("p_max must be >= 1")
    if panel.T <= 2 * p_max:
        raise TooShortSample(f"T={panel.T} too short for p_max={p_max} (need T > 2 * p_max)")
    n = panel.T - p_max
    penalty_constant(criterion, n)
    sigma2 = np.vstack([ar_residual_variances(panel.values[:, k], p_max, intercept) for k in range(panel.K)])
    selection = LagSelection(0, criterion.lower(), np.empty(0), sigma2, n)
    scores = selection.recompute_scores()
    selection.scores = scores
    # argmin returns the first minimizer, i.e. ties go to the smaller p
    selection.p_chosen = int(np.argmin(scores)) + 1
    return selection
