"""Dense least squares, projections and the chi-square / F distribution functions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize, special

from pdsla.errors import DegenerateDenominator, DimensionMismatch, DomainError, RankDeficient

RANK_TOL = 1e-10
QUANTILE_XTOL = 1e-10


@dataclass(frozen=True)
class OlsFit:
    """Least-squares fit of ``y`` on ``X``.

    ``sigma2_hat`` is SSR / n (no degrees-of-freedom correction) and
    ``covariance`` is ``sigma2_hat * inv(X'X)``.
    """

    coefficients: np.ndarray
    residuals: np.ndarray
    sigma2_hat: float
    covariance: np.ndarray

    @property
    def ssr(self) -> float:
        return float(self.residuals @ self.residuals)


def _as_design(X, y=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise DimensionMismatch(f"design must be a non-empty 2-d array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DimensionMismatch("design contains non-finite entries")
    if y is None:
        return X, None
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != X.shape[0]:
        raise DimensionMismatch(f"design has {X.shape[0]} rows but response has {y.shape[0]}")
    if not np.all(np.isfinite(y)):
        raise DimensionMismatch("response contains non-finite entries")
    return X, y


def _pivoted_qr(X):
    n, k = X.shape
    if n < k:
        raise RankDeficient(f"need at least as many rows as columns, got {n}x{k}")
    Q, R, piv = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[0] == 0.0 or diag[-1] < RANK_TOL * diag[0]:
        dependent = int(np.sum(diag < RANK_TOL * diag[0])) if diag[0] > 0 else k
        raise RankDeficient(f"design is rank deficient ({dependent} dependent column(s) of {k})")
    return Q, R, piv


def ols(X, y) -> OlsFit:
    """Fit ``y`` on ``X`` by ordinary least squares through a pivoted QR."""
    X, y = _as_design(X, y)
    Q, R, piv = _pivoted_qr(X)
    n, k = X.shape
    b_piv = linalg.solve_triangular(R, Q.T @ y)
    coef = np.empty(k)
    coef[piv] = b_piv
    resid = y - X @ coef
    sigma2 = float(resid @ resid) / n
    r_inv = linalg.solve_triangular(R, np.eye(k))
    xtx_inv_piv = r_inv @ r_inv.T
    xtx_inv = np.empty((k, k))
    xtx_inv[np.ix_(piv, piv)] = xtx_inv_piv
    return OlsFit(coef, resid, sigma2, sigma2 * xtx_inv)


def residual_maker(X, y) -> np.ndarray:
    """Return ``M(X) y = (I - X (X'X)^-1 X') y``."""
    X, y = _as_design(X, y)
    Q, _, _ = _pivoted_qr(X)
    return y - Q @ (Q.T @ y)


def is_full_rank(X) -> bool:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] == 0:
        return True
    try:
        _pivoted_qr(X)
    except RankDeficient:
        return False
    return True


def r_squared(residuals_restricted, residuals_full) -> float:
    """``1 - nu'nu / xi'xi`` for restricted residuals ``xi`` and full-model residuals ``nu``."""
    xi = np.asarray(residuals_restricted, dtype=float).ravel()
    nu = np.asarray(residuals_full, dtype=float).ravel()
    if xi.shape != nu.shape:
        raise DimensionMismatch("residual vectors differ in length")
    denom = float(xi @ xi)
    if denom == 0.0:
        raise DegenerateDenominator("restricted residuals are identically zero")
    return 1.0 - float(nu @ nu) / denom


# --- distribution functions -------------------------------------------------


def _check_df(*dfs):
    for df in dfs:
        if not df >= 1:
            raise DomainError(f"degrees of freedom must be >= 1, got {df}")


def _check_prob(prob):
    if not 0.0 < prob < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {prob}")


def chi2_cdf(x: float, df: float) -> float:
    _check_df(df)
    if x <= 0:
        return 0.0
    return float(special.gammainc(df / 2.0, x / 2.0))


def chi2_sf(x: float, df: float) -> float:
    """Upper tail probability of the chi-square distribution."""
    _check_df(df)
    if x <= 0:
        return 1.0
    return float(special.gammaincc(df / 2.0, x / 2.0))


def f_cdf(x: float, df1: float, df2: float) -> float:
    _check_df(df1, df2)
    if x <= 0:
        return 0.0
    return float(special.betainc(df1 / 2.0, df2 / 2.0, df1 * x / (df1 * x + df2)))


def f_sf(x: float, df1: float, df2: float) -> float:
    """Upper tail probability of the F distribution."""
    _check_df(df1, df2)
    if x <= 0:
        return 1.0
    return float(special.betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * x)))


def _bracketed_root(cdf, sf, prob):
    # Root of cdf(x) = prob; solve on whichever tail keeps precision.
    if prob > 0.5:
        target = 1.0 - prob
        fun = lambda x: sf(x) - target  # noqa: E731
    else:
        fun = lambda x: cdf(x) - prob  # noqa: E731
    lo, hi = 0.0, 1.0
    while (fun(hi) < 0) if prob <= 0.5 else (fun(hi) > 0):
        lo, hi = hi, hi * 2.0
        if hi > 1e300:
            raise DomainError("quantile bracket overflow")
    return optimize.brentq(fun, lo, hi, xtol=QUANTILE_XTOL * max(1.0, lo), rtol=4 * np.finfo(float).eps, maxiter=500)


def chi2_quantile(prob: float, df: float) -> float:
    """Inverse of :func:`chi2_cdf`."""
    _check_df(df)
    _check_prob(prob)
    return _bracketed_root(lambda x: chi2_cdf(x, df), lambda x: chi2_sf(x, df), prob)


def f_quantile(prob: float, df1: float, df2: float) -> float:
    _check_df(df1, df2)
    _check_prob(prob)
    return _bracketed_root(lambda x: f_cdf(x, df1, df2), lambda x: f_sf(x, df1, df2), prob)


def log_or_floor(x: float) -> float:
    return math.log(max(x, np.finfo(float).tiny))
