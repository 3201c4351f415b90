"""Coordinate-descent lasso with unpenalized columns and BIC penalty selection.

The program solved for each penalty ``lam`` is::

    min_eta  (1/n) ||y - Z eta||^2 + lam * sum_{j penalized} w_j |eta_j|

Unpenalized columns are partialled out first (Frisch-Waugh-Lovell), the
remaining columns are scaled to unit mean square, the penalized problem is
solved on the Gram matrix and the unpenalized coefficients are recovered by a
least-squares refit. With standardization the weights are ``w_j = s_j`` (the
column scales), which is the same as an unweighted lasso on scaled columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from pdsla.errors import AllViolateBound, DimensionMismatch, NonConvergence, UsageError

DEFAULT_N_LAMBDA = 100
DEFAULT_LAMBDA_RATIO = 1e-4
DEFAULT_TOL = 1e-7
DEFAULT_MAX_SWEEPS = 10_000
C_LADDER = (0.5, 0.33, 0.25)
# penalized columns whose scale falls below this (relative) are treated as absent
_ZERO_COLUMN_TOL = 1e-12


def soft_threshold(z: float, gamma: float) -> float:
    if gamma < 0:
        raise UsageError("threshold must be non-negative")
    return math.copysign(max(abs(z) - gamma, 0.0), z)


@numba.njit(cache=True, nogil=True)
def _objective(G, c, half, x):
    m = x.shape[0]
    val = 0.0
    for j in range(m):
        if x[j] != 0.0:
            gx = 0.0
            for i in range(m):
                gx += G[j, i] * x[i]
            val += x[j] * gx - 2.0 * c[j] * x[j] + 2.0 * half * abs(x[j])
    return val


@numba.njit(cache=True, nogil=True)
def _polish(G, c, half, eta):
    # Feature-sign search started from the CD iterate: solve the stationarity
    # equations on the current support and signs, then move toward that point
    # only as far as the best zero crossing allows, so the objective never
    # rises. Inactive violators of |grad_j| <= lam/2 enter one at a time. The
    # result is written back only if it satisfies every optimality condition.
    m = eta.shape[0]
    x = eta.copy()
    sgn = np.sign(x)
    slack = half * (1.0 + 1e-9) + 1e-14
    for _ in range(4 * m + 4):
        k = 0
        for j in range(m):
            if sgn[j] != 0.0:
                k += 1
        if k > 0:
            S = np.empty(k, dtype=np.int64)
            k = 0
            for j in range(m):
                if sgn[j] != 0.0:
                    S[k] = j
                    k += 1
            Gs = np.empty((k, k))
            rhs = np.empty(k)
            for a in range(k):
                rhs[a] = c[S[a]] - half * sgn[S[a]]
                for b in range(k):
                    Gs[a, b] = G[S[a], S[b]]
            try:
                target = np.linalg.solve(Gs, rhs)
            except Exception:
                return False
            consistent = True
            for a in range(k):
                if not np.isfinite(target[a]):
                    return False
                if target[a] * sgn[S[a]] <= 0.0:
                    consistent = False
            if consistent:
                for a in range(k):
                    x[S[a]] = target[a]
            else:
                # candidates: the target itself and every zero crossing on the way
                best_t = 1.0
                trial = x.copy()
                for a in range(k):
                    trial[S[a]] = target[a]
                best_val = _objective(G, c, half, trial)
                for a in range(k):
                    step = target[a] - x[S[a]]
                    if step == 0.0:
                        continue
                    t = -x[S[a]] / step
                    if 0.0 < t < 1.0:
                        for b in range(k):
                            trial[S[b]] = x[S[b]] + t * (target[b] - x[S[b]])
                        trial[S[a]] = 0.0
                        val = _objective(G, c, half, trial)
                        if val < best_val:
                            best_val = val
                            best_t = t
                zeroed = False
                for a in range(k):
                    new = x[S[a]] + best_t * (target[a] - x[S[a]])
                    if new * sgn[S[a]] <= 0.0 or abs(new) <= 1e-15 * (1.0 + abs(x[S[a]])):
                        new = 0.0
                        sgn[S[a]] = 0.0
                        zeroed = True
                    x[S[a]] = new
                if zeroed or best_t < 1.0:
                    continue
        worst = 0.0
        worst_j = -1
        sgn_new = 0.0
        for j in range(m):
            if sgn[j] != 0.0 or G[j, j] <= 0.0:
                continue
            g = c[j]
            for i in range(m):
                g -= G[j, i] * x[i]
            excess = abs(g) - slack
            if excess > worst:
                worst = excess
                worst_j = j
                sgn_new = np.sign(g)
        if worst_j < 0:
            for j in range(m):
                eta[j] = x[j]
            return True
        sgn[worst_j] = sgn_new
    return False


@numba.njit(cache=True, nogil=True)
def _cd_solve(G, c, lam, eta, tol, max_sweeps, history):
    # Minimizes eta'G eta - 2 c'eta + lam ||eta||_1 in place; G has unit diagonal
    # for standardized columns but the general diagonal is handled.
    m = eta.shape[0]
    grad = c.copy()  # c - G eta
    for k in range(m):
        if eta[k] != 0.0:
            for j in range(m):
                grad[j] -= G[j, k] * eta[k]
    half = 0.5 * lam
    n_hist = history.shape[0]
    for sweep in range(max_sweeps):
        max_change = 0.0
        for j in range(m):
            gjj = G[j, j]
            if gjj <= 0.0:
                continue
            old = eta[j]
            z = grad[j] + gjj * old
            if z > half:
                new = (z - half) / gjj
            elif z < -half:
                new = (z + half) / gjj
            else:
                new = 0.0
            delta = new - old
            if delta != 0.0:
                eta[j] = new
                for i in range(m):
                    grad[i] -= G[i, j] * delta
                change = abs(delta) * math.sqrt(gjj)
                if change > max_change:
                    max_change = change
        if sweep < n_hist:
            # eta'G eta = eta'(c - grad)
            obj = 0.0
            for j in range(m):
                obj += eta[j] * (c[j] - grad[j]) - 2.0 * c[j] * eta[j] + lam * abs(eta[j])
            history[sweep] = obj
        if max_change < tol:
            return sweep + 1
        if sweep % 10 == 9 and n_hist == 0 and _polish(G, c, half, eta):
            return sweep + 1
    return -1


@dataclass
class LassoProblem:
    """A lasso program over ``design`` (n x m).

    ``lambda_grid`` is on the scale of the internally standardized problem
    when ``standardize`` is on; ``None`` means the default log-spaced grid from
    ``lambda_max`` down to ``1e-4 * lambda_max``.
    """

    design: np.ndarray
    response: np.ndarray
    penalty_free: Sequence[int] = ()
    lambda_grid: Optional[np.ndarray] = None
    max_selected_fraction: float = 0.5
    standardize: bool = True
    tol: float = DEFAULT_TOL
    max_sweeps: int = DEFAULT_MAX_SWEEPS
    stop_above: Optional[int] = None

    def __post_init__(self):
        self.design = np.asarray(self.design, dtype=float)
        if self.design.ndim != 2:
            raise DimensionMismatch("design must be 2-d")
        self.response = np.asarray(self.response, dtype=float).ravel()
        if self.response.shape[0] != self.design.shape[0]:
            raise DimensionMismatch("design and response lengths differ")
        m = self.design.shape[1]
        self.penalty_free = tuple(sorted(set(int(j) for j in self.penalty_free)))
        if any(j < 0 or j >= m for j in self.penalty_free):
            raise DimensionMismatch("penalty_free index out of range")
        if not 0.0 < self.max_selected_fraction < 1.0:
            raise UsageError("max_selected_fraction must lie in (0, 1)")
        if self.lambda_grid is not None:
            grid = np.atleast_1d(np.asarray(self.lambda_grid, dtype=float))
            if grid.size == 0 or np.any(grid < 0) or np.any(np.diff(grid) >= 0):
                raise UsageError("lambda_grid must be non-empty, non-negative and strictly decreasing")
            self.lambda_grid = grid

    @property
    def penalized(self) -> np.ndarray:
        free = set(self.penalty_free)
        return np.array([j for j in range(self.design.shape[1]) if j not in free], dtype=int)


@dataclass
class LassoPath:
    """Solutions along the lambda grid, in original (unscaled) coordinates."""

    lambdas: np.ndarray
    coefficients: np.ndarray  # (n_lambda, m)
    ssr: np.ndarray
    active_counts: np.ndarray
    penalized: np.ndarray
    weights: np.ndarray  # per penalized column
    lambda_max: float
    sweeps: np.ndarray
    n_obs: int

    def active_set(self, k: int) -> np.ndarray:
        return self.penalized[self.coefficients[k, self.penalized] != 0.0]


@dataclass
class LassoFit:
    coefficients: np.ndarray
    lambda_chosen: float
    active_set: np.ndarray
    bic_value: float
    path_diagnostics: list = field(default_factory=list)  # (lambda, active count, ssr, bic)
    index: int = 0


class _Prepared:
    """Partialled-out, scaled penalized block plus what is needed to map back."""

    def __init__(self, problem: LassoProblem):
        Z, y = problem.design, problem.response
        n = Z.shape[0]
        self.n = n
        self.penalized = problem.penalized
        self.free = np.array(problem.penalty_free, dtype=int)
        Zp = Z[:, self.penalized]
        if self.free.size:
            U = Z[:, self.free]
            Q, _ = np.linalg.qr(U)
            self.Q = Q
            Zp = Zp - Q @ (Q.T @ Zp)
            y = y - Q @ (Q.T @ y)
        else:
            self.Q = None
        raw_scale = np.sqrt(np.mean(Z[:, self.penalized] ** 2, axis=0)) if self.penalized.size else np.zeros(0)
        scale = np.sqrt(np.mean(Zp**2, axis=0)) if self.penalized.size else np.zeros(0)
        self.usable = scale > _ZERO_COLUMN_TOL * np.maximum(raw_scale, 1.0)
        if problem.standardize:
            self.scale = np.where(self.usable, scale, 1.0)
        else:
            self.scale = np.ones_like(scale)
        Zs = Zp / self.scale
        Zs[:, ~self.usable] = 0.0
        self.Zs = Zs
        self.y_tilde = y
        self.G = np.ascontiguousarray(Zs.T @ Zs / n)
        self.c = Zs.T @ y / n

    @property
    def lambda_max(self) -> float:
        if self.c.size == 0:
            return 0.0
        return float(2.0 * np.max(np.abs(self.c)))

    def unscale(self, etas_std: np.ndarray, problem: LassoProblem) -> np.ndarray:
        """Map standardized penalized solutions (one per row) to full coefficient rows."""
        etas_std = np.atleast_2d(etas_std)
        coefs = np.zeros((etas_std.shape[0], problem.design.shape[1]))
        coefs[:, self.penalized] = etas_std / self.scale
        if self.free.size and etas_std.shape[0]:
            Z = problem.design
            partial = problem.response[:, None] - Z[:, self.penalized] @ coefs[:, self.penalized].T
            coefs[:, self.free] = np.linalg.lstsq(Z[:, self.free], partial, rcond=None)[0].T
        return coefs


def default_lambda_grid(lambda_max: float, n_lambda: int = DEFAULT_N_LAMBDA, ratio: float = DEFAULT_LAMBDA_RATIO) -> np.ndarray:
    if lambda_max <= 0:
        return np.array([0.0])
    return np.geomspace(lambda_max, ratio * lambda_max, n_lambda)


def lasso_path(problem: LassoProblem, *, trace: bool = False) -> LassoPath:
    """Solve the program for every penalty on the grid, warm-starting down the path."""
    prep = _Prepared(problem)
    lam_max = prep.lambda_max
    grid = problem.lambda_grid if problem.lambda_grid is not None else default_lambda_grid(lam_max)
    m_pen = prep.penalized.size
    eta = np.zeros(m_pen)
    etas = np.zeros((grid.size, m_pen))
    sweeps = np.zeros(grid.size, dtype=np.int64)
    history = np.zeros(0)
    histories = []
    for k, lam in enumerate(grid):
        if trace:
            history = np.full(problem.max_sweeps if problem.max_sweeps < 100_000 else 100_000, np.nan)
        if m_pen:
            n_sweeps = _cd_solve(prep.G, prep.c, float(lam), eta, problem.tol, problem.max_sweeps, history)
            if n_sweeps < 0:
                raise NonConvergence(
                    f"coordinate descent did not converge in {problem.max_sweeps} sweeps at lambda={lam:.3g}"
                )
            sweeps[k] = n_sweeps
        if trace:
            histories.append(history[: sweeps[k]].copy())
        etas[k] = eta
        if problem.stop_above is not None and np.count_nonzero(eta) > problem.stop_above:
            # smaller penalties only grow the support further; nothing left is admissible
            grid, etas, sweeps = grid[: k + 1], etas[: k + 1], sweeps[: k + 1]
            break
    resid = prep.y_tilde[:, None] - prep.Zs @ etas.T
    ssr = np.sum(resid**2, axis=0)
    coefs = prep.unscale(etas, problem)
    active_counts = np.count_nonzero(etas, axis=1)
    path = LassoPath(
        lambdas=grid,
        coefficients=coefs,
        ssr=ssr,
        active_counts=active_counts,
        penalized=prep.penalized,
        weights=prep.scale.copy(),
        lambda_max=lam_max,
        sweeps=sweeps,
        n_obs=prep.n,
    )
    if trace:
        path.histories = histories
    return path


def bic(ssr: float, n_active: int, n: int) -> float:
    """``log(SSR / n) + df * log(n) / n`` with df the number of nonzero penalized coefficients."""
    return math.log(max(ssr / n, np.finfo(float).tiny)) + n_active * math.log(n) / n


def select_from_path(path: LassoPath, c: float) -> LassoFit:
    """BIC minimizer among grid points selecting at most ``c * n`` variables; ties go to the larger lambda."""
    n = path.n_obs
    limit = c * n
    diagnostics = []
    best = None
    for k, lam in enumerate(path.lambdas):
        a = int(path.active_counts[k])
        value = bic(float(path.ssr[k]), a, n)
        diagnostics.append((float(lam), a, float(path.ssr[k]), value))
        if a <= limit and (best is None or value < best[1]):
            best = (k, value)
    if best is None:
        raise AllViolateBound(f"every lambda selects more than c*T = {limit:g} variables")
    k = best[0]
    return LassoFit(
        coefficients=path.coefficients[k].copy(),
        lambda_chosen=float(path.lambdas[k]),
        active_set=path.active_set(k),
        bic_value=best[1],
        path_diagnostics=diagnostics,
        index=k,
    )


def bic_select(problem: LassoProblem) -> LassoFit:
    return select_from_path(lasso_path(problem), problem.max_selected_fraction)


def kkt_violation(problem: LassoProblem, coefficients: np.ndarray, lam: float) -> float:
    """Largest violation of the optimality conditions at ``coefficients``.

    Checked on the original design, so this does not reuse the solver's
    internals except for the column weights implied by standardization.
    Returns the max over: ``|grad_j| - lam * w_j`` for inactive penalized
    columns, ``|grad_j + lam * w_j * sign(eta_j)|`` for active ones and
    ``|grad_j|`` for unpenalized ones, where ``grad = -(2/n) Z'(y - Z eta)``.
    """
    Z, y = problem.design, problem.response
    n = Z.shape[0]
    r = y - Z @ coefficients
    grad = -2.0 / n * (Z.T @ r)
    pen = problem.penalized
    free = np.array(problem.penalty_free, dtype=int)
    weights = np.ones(pen.size)
    if problem.standardize and pen.size:
        Zp = Z[:, pen]
        if free.size:
            Q, _ = np.linalg.qr(Z[:, free])
            Zp = Zp - Q @ (Q.T @ Zp)
        weights = np.sqrt(np.mean(Zp**2, axis=0))
    worst = 0.0
    if free.size:
        worst = max(worst, float(np.max(np.abs(grad[free]))))
    for w, j in zip(weights, pen):
        if coefficients[j] == 0.0:
            worst = max(worst, abs(grad[j]) - lam * w)
        else:
            worst = max(worst, abs(grad[j] + lam * w * np.sign(coefficients[j])))
    return worst
