"""Lagged design matrices and the lag-augmentation transformation algebra."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from pdsla.errors import TooShortSample, UsageError
from pdsla.panel import Panel

MAX_AUGMENTATION = 2


@dataclass(frozen=True)
class LagConfig:
    """Lag order ``p``, augmentation order ``d`` and sample handling.

    ``trim_initial`` drops the first ``p + d`` rows; otherwise pre-sample lags
    are zero-filled and all ``T`` rows are kept.
    """

    p: int
    d: int = 0
    trim_initial: bool = True
    intercept: bool = False

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise UsageError(f"lag order p must be an integer >= 1, got {self.p}")
        if int(self.d) != self.d or self.d < 0:
            raise UsageError(f"augmentation order d must be a non-negative integer, got {self.d}")
        if self.d > MAX_AUGMENTATION:
            raise UsageError(
                f"augmentation order d={self.d} not supported; series of order above I(2) are out of range (d <= 2)"
            )
        if self.p < self.d + 1:
            warnings.warn(
                f"p={self.p} < d+1={self.d + 1}: first-stage regressions risk being spurious; "
                "an extra lag of the causing variable will be added to them",
                stacklevel=3,
            )

    @property
    def needs_extra_lag(self) -> bool:
        return self.d >= 1 and self.p <= self.d


@dataclass(frozen=True)
class DesignSet:
    """Regression-ready blocks for one (caused, causing) pair.

    Column ``j`` of ``x_lags`` holds lag ``j + 1`` of the causing variable,
    ``x_aug`` holds lags ``p + 1 .. p + d``. ``w_labels`` names each column of
    ``w_lags`` as ``(variable, lag)``; variables vary slowest.
    """

    y: np.ndarray
    x_lags: np.ndarray
    x_aug: np.ndarray
    y_lags: np.ndarray
    w_lags: np.ndarray
    w_labels: tuple
    caused: str
    causing: str
    p: int
    d: int
    intercept: bool = False

    @property
    def t_eff(self) -> int:
        return self.y.shape[0]

    @property
    def controls(self) -> np.ndarray:
        """``V = (Y_{-p}, W_{-p})``."""
        return np.hstack([self.y_lags, self.w_lags])

    @property
    def control_labels(self) -> tuple:
        return tuple((self.caused, j + 1) for j in range(self.p)) + self.w_labels

    @property
    def x_full(self) -> np.ndarray:
        """``X_{-(p+d)}``: all ``p + d`` lags of the causing variable."""
        return np.hstack([self.x_lags, self.x_aug])

    def with_x_block(self, x_full: np.ndarray) -> "DesignSet":
        """Copy with the ``p + d`` causing-variable columns replaced."""
        x_full = np.asarray(x_full, dtype=float)
        return DesignSet(
            self.y, x_full[:, : self.p], x_full[:, self.p :], self.y_lags, self.w_lags,
            self.w_labels, self.caused, self.causing, self.p, self.d, self.intercept,
        )


def lag_block(series: np.ndarray, first: int, last: int, rows: np.ndarray) -> np.ndarray:
    """Columns ``series[t - j]`` for ``j = first..last`` at row indices ``rows``; negative times read as zero."""
    out = np.zeros((rows.shape[0], last - first + 1))
    for col, j in enumerate(range(first, last + 1)):
        src = rows - j
        ok = src >= 0
        out[ok, col] = series[src[ok]]
    return out


def build_design(panel: Panel, caused, causing, cfg: LagConfig) -> DesignSet:
    iy, ix = panel.index(caused), panel.index(causing)
    if iy == ix:
        raise UsageError("caused and causing variable must differ")
    p, d = cfg.p, cfg.d
    T = panel.T
    start = p + d if cfg.trim_initial else 0
    rows = np.arange(start, T)
    t_eff = rows.shape[0]
    # the smallest second stage has (p + d) x-lags, p y-lags and the intercept
    min_regressors = 2 * p + d + int(cfg.intercept)
    if t_eff <= min_regressors:
        raise TooShortSample(
            f"T={T} leaves {t_eff} usable rows, need more than {min_regressors} for p={p}, d={d}"
        )
    vals = panel.values
    y_series, x_series = vals[:, iy], vals[:, ix]
    others = [k for k in range(panel.K) if k not in (iy, ix)]
    w_blocks = [lag_block(vals[:, k], 1, p, rows) for k in others]
    w_lags = np.hstack(w_blocks) if w_blocks else np.zeros((t_eff, 0))
    w_labels = tuple((panel.names[k], j) for k in others for j in range(1, p + 1))
    return DesignSet(
        y=y_series[rows].copy(),
        x_lags=lag_block(x_series, 1, p, rows),
        x_aug=lag_block(x_series, p + 1, p + d, rows) if d else np.zeros((t_eff, 0)),
        y_lags=lag_block(y_series, 1, p, rows),
        w_lags=w_lags,
        w_labels=w_labels,
        caused=panel.names[iy],
        causing=panel.names[ix],
        p=p,
        d=d,
        intercept=cfg.intercept,
    )


# --- transformation algebra -------------------------------------------------


def build_R(n: int) -> np.ndarray:
    """Upper-triangular matrix of ones (integer dtype)."""
    if n < 1:
        raise UsageError("n must be >= 1")
    return np.triu(np.ones((n, n), dtype=np.int64))


def build_P(n: int, d: int) -> np.ndarray:
    """``P_d = R^d``, the order-``d`` integration matrix; ``P_0`` is the identity."""
    if d < 0:
        raise UsageError("d must be >= 0")
    return np.linalg.matrix_power(build_R(n), d)


def build_P_inverse(n: int, d: int) -> np.ndarray:
    """``P_d^{-1} = (R^{-1})^d`` built in integers; ``R^{-1}`` has -1 on the superdiagonal."""
    if n < 1 or d < 0:
        raise UsageError("need n >= 1 and d >= 0")
    r_inv = np.eye(n, dtype=np.int64) - np.eye(n, k=1, dtype=np.int64)
    return np.linalg.matrix_power(r_inv, d)


def difference_transform(lag_vector, d: int) -> np.ndarray:
    """Apply ``P_d^{-1}`` to ``(x_{t-1}, ..., x_{t-p-d})``.

    The first ``p`` entries become ``d``-th differences. Integer input stays
    integer.
    """
    v = np.asarray(lag_vector)
    if v.ndim != 1 or v.shape[0] < max(d, 1):
        raise UsageError("lag vector must be 1-d with length >= d")
    return build_P_inverse(v.shape[0], d) @ v


def transform_lag_block(x_full: np.ndarray, d: int) -> np.ndarray:
    """Row-wise :func:`difference_transform` of a ``T x (p+d)`` lag block, i.e. ``X (P_d^{-1})'``."""
    x_full = np.asarray(x_full, dtype=float)
    return x_full @ build_P_inverse(x_full.shape[1], d).T.astype(float)
