"""Post-double-selection, lag-augmented Granger causality tests.

Stage one runs ``p + 1`` lasso regressions (the caused variable and each of
the ``p`` lags of the causing variable on everything else) and collects the
selected control columns. Stage two is least squares on the ``p + d`` lags of
the causing variable plus the selected controls, tested with an LM (chi-square
or F-corrected) or Wald statistic on the first ``p`` lags only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from pdsla.errors import AllViolateBound, InsufficientDof, RankDeficient, UsageError
from pdsla.lags import DesignSet, LagConfig, build_design
from pdsla.lasso import C_LADDER, LassoPath, LassoProblem, lasso_path, select_from_path
from pdsla.panel import Panel
from pdsla.regress import chi2_sf, f_sf, is_full_rank, ols, r_squared, residual_maker

VARIANTS = ("lm-f", "lm-chi2", "wald")
_KIND = {"lm-f": "LM_F", "lm-chi2": "LM_chi2", "wald": "Wald"}


@dataclass(frozen=True)
class ActiveSets:
    """Selected control columns, as indices into ``V = (Y_{-p}, W_{-p})``.

    Lags of the caused variable are never penalized and enter stage two
    unconditionally, so they do not appear here; only lagged controls from
    ``W`` can be selected.
    """

    per_equation: tuple
    union: tuple
    c: Optional[float] = None
    strength: dict = field(default_factory=dict, compare=False)

    @property
    def union_size(self) -> int:
        return len(self.union)

    @classmethod
    def from_union(cls, union: Sequence[int]) -> "ActiveSets":
        u = tuple(sorted(set(int(i) for i in union)))
        return cls(per_equation=(u,), union=u)


@dataclass
class GcTestResult:
    statistic: float
    kind: str
    df1: int
    df2: Optional[int]
    p_value: float
    selected: ActiveSets
    beta_hat: np.ndarray
    p: int
    d: int
    c: Optional[float]
    t_eff: int
    n_controls: int
    r_squared: Optional[float] = None
    caused: str = ""
    causing: str = ""
    selected_labels: tuple = ()
    dropped: tuple = ()

    @property
    def method(self) -> str:
        test = "Wald" if self.kind == "Wald" else "LM"
        return f"PDS-{test} (stationary)" if self.d == 0 else f"PDS-LA-{test}"

    def reject(self, alpha: float) -> bool:
        return self.p_value < alpha

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "caused": self.caused,
            "causing": self.causing,
            "kind": self.kind,
            "statistic": float(self.statistic),
            "df1": self.df1,
            "df2": self.df2,
            "p_value": float(self.p_value),
            "r_squared": None if self.r_squared is None else float(self.r_squared),
            "beta_hat": [float(b) for b in self.beta_hat],
            "p": self.p,
            "d": self.d,
            "c": self.c,
            "t_eff": self.t_eff,
            "n_controls": self.n_controls,
            "selected_count": self.selected.union_size,
            "selected": [f"{name}.L{lag}" for name, lag in self.selected_labels],
            "dropped": [f"{name}.L{lag}" for name, lag in self.dropped],
        }


# --- stage one --------------------------------------------------------------


@dataclass
class _FirstStage:
    paths: list  # one LassoPath per equation
    w_columns: list  # per equation: design column index -> W index (or -1)
    n_w: int
    p: int


def _first_stage_design(design: DesignSet, extra_lag: bool):
    """``Z_{-p}`` = (X lags, Y lags, W lags[, x_{-(p+1)}][, 1]) and its penalty-free columns."""
    p = design.p
    n_w = design.w_lags.shape[1]
    blocks = [design.x_lags, design.y_lags, design.w_lags]
    free = list(range(2 * p))
    ncol = 2 * p + n_w
    if extra_lag:
        blocks.append(design.x_aug[:, :1])
        free.append(ncol)
        ncol += 1
    if design.intercept:
        blocks.append(np.ones((design.t_eff, 1)))
        free.append(ncol)
        ncol += 1
    return np.hstack(blocks), free


def _run_first_stage(design: DesignSet, extra_lag: bool, max_c: Optional[float] = None) -> _FirstStage:
    p = design.p
    n_w = design.w_lags.shape[1]
    Z, free = _first_stage_design(design, extra_lag)
    w_of_col = np.full(Z.shape[1], -1)
    w_of_col[2 * p : 2 * p + n_w] = np.arange(n_w)
    paths, maps = [], []
    # equation 0: y on all of Z; equation j: x_{-j} on Z without its own column
    jobs = [(design.y, np.arange(Z.shape[1]))]
    for j in range(p):
        jobs.append((design.x_lags[:, j], np.delete(np.arange(Z.shape[1]), j)))
    for response, cols in jobs:
        col_free = [k for k, col in enumerate(cols) if col in free]
        stop = None if max_c is None else int(np.floor(max_c * design.t_eff))
        problem = LassoProblem(Z[:, cols], response, penalty_free=col_free, stop_above=stop)
        paths.append(lasso_path(problem))
        maps.append(w_of_col[cols])
    return _FirstStage(paths, maps, n_w, p)


def _select(stage: _FirstStage, c: float) -> ActiveSets:
    per_eq = []
    strength: dict = {}
    for path, w_map in zip(stage.paths, stage.w_columns):
        fit = select_from_path(path, c)
        chosen = []
        for col in fit.active_set:
            w = int(w_map[col])
            if w < 0:
                continue
            v_idx = stage.p + w
            chosen.append(v_idx)
            # standardized magnitude, for deterministic pruning if stage two is infeasible
            pos = int(np.searchsorted(path.penalized, col))
            size = abs(fit.coefficients[col]) * path.weights[pos]
            strength[v_idx] = max(strength.get(v_idx, 0.0), float(size))
        per_eq.append(tuple(sorted(chosen)))
    union = tuple(sorted(set().union(*per_eq)))
    return ActiveSets(tuple(per_eq), union, c, strength)


def first_stage(design: DesignSet, c: float = 0.5, extra_lag: Optional[bool] = None) -> ActiveSets:
    """Double selection at a single bound ``c``; raises :class:`AllViolateBound`."""
    extra = _resolve_extra_lag(design, extra_lag)
    return _select(_run_first_stage(design, extra, c), c)


def _resolve_extra_lag(design: DesignSet, extra_lag: Optional[bool]) -> bool:
    if extra_lag is None:
        return design.d >= 1 and design.p <= design.d
    if extra_lag and design.d < 1:
        raise UsageError("an extra first-stage lag needs d >= 1 (it reuses the first augmentation lag)")
    return bool(extra_lag)


# --- stage two --------------------------------------------------------------


def _augmented_controls(design: DesignSet, active: ActiveSets) -> np.ndarray:
    """``V_{+,S} = (x_{-(p+1)}, ..., x_{-(p+d)}, Y_{-p}, W_S[, 1])``."""
    p = design.p
    w_idx = [i - p for i in active.union]
    blocks = [design.x_aug, design.y_lags, design.w_lags[:, w_idx]]
    if design.intercept:
        blocks.append(np.ones((design.t_eff, 1)))
    return np.hstack(blocks)


def n_controls(design: DesignSet, active: ActiveSets) -> int:
    """Regressors in stage two other than the ``p + d`` causing-variable lags."""
    return design.p + active.union_size + int(design.intercept)


def second_stage_dof(design: DesignSet, active: ActiveSets) -> int:
    return design.t_eff - n_controls(design, active) - (design.p + design.d)


def lm_f_statistic(r2: float, t_eff: int, n_controls: int, p: int, d: int) -> float:
    """Small-sample corrected LM statistic ``((T - S - (p+d)) / p) * R^2 / (1 - R^2)``."""
    if r2 >= 1.0:
        return float("inf")
    return (t_eff - n_controls - (p + d)) / p * r2 / (1.0 - r2)


def _labels(design: DesignSet, active: ActiveSets) -> tuple:
    labels = design.control_labels
    return tuple(labels[i] for i in active.union)


def second_stage_lm(design: DesignSet, active: ActiveSets, variant: str = "F") -> GcTestResult:
    """LM test from the R^2 of regressing restricted residuals on the full regressor set."""
    variant = variant.lower()
    if variant in ("f", "lm-f"):
        kind = "LM_F"
    elif variant in ("chi2", "lm-chi2"):
        kind = "LM_chi2"
    else:
        raise UsageError(f"unknown LM variant {variant!r}")
    p, d = design.p, design.d
    df2 = second_stage_dof(design, active)
    if df2 < 1:
        raise InsufficientDof(f"stage two leaves {df2} residual degrees of freedom")
    v_plus = _augmented_controls(design, active)
    xi = residual_maker(v_plus, design.y)
    fit = ols(np.hstack([v_plus, design.x_lags]), xi)
    r2 = min(max(r_squared(xi, fit.residuals), 0.0), 1.0)
    t_eff = design.t_eff
    if kind == "LM_chi2":
        stat = t_eff * r2
        pval = chi2_sf(stat, p)
        df2_out = None
    else:
        stat = lm_f_statistic(r2, t_eff, n_controls(design, active), p, d)
        pval = 0.0 if np.isinf(stat) else f_sf(stat, p, df2)
        df2_out = df2
    return GcTestResult(
        statistic=float(stat), kind=kind, df1=p, df2=df2_out, p_value=float(pval),
        selected=active, beta_hat=fit.coefficients[-p:].copy(), p=p, d=d, c=active.c,
        t_eff=t_eff, n_controls=n_controls(design, active), r_squared=float(r2),
        caused=design.caused, causing=design.causing, selected_labels=_labels(design, active),
    )


def second_stage_wald(design: DesignSet, active: ActiveSets) -> GcTestResult:
    """Wald test on the first ``p`` lag coefficients with covariance ``sigma2 * inv(X'X)``, sigma2 = SSR/T."""
    p, d = design.p, design.d
    df2 = second_stage_dof(design, active)
    if df2 < 1:
        raise InsufficientDof(f"stage two leaves {df2} residual degrees of freedom")
    v_plus = _augmented_controls(design, active)
    fit = ols(np.hstack([design.x_lags, v_plus]), design.y)
    beta = fit.coefficients[:p]
    cov = fit.covariance[:p, :p]
    stat = float(beta @ np.linalg.solve(cov, beta))
    return GcTestResult(
        statistic=stat, kind="Wald", df1=p, df2=None, p_value=chi2_sf(stat, p),
        selected=active, beta_hat=beta.copy(), p=p, d=d, c=active.c, t_eff=design.t_eff,
        n_controls=n_controls(design, active), caused=design.caused, causing=design.causing,
        selected_labels=_labels(design, active),
    )


def second_stage(design: DesignSet, active: ActiveSets, variant: str = "lm-f") -> GcTestResult:
    if variant not in VARIANTS:
        raise UsageError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if variant == "wald":
        return second_stage_wald(design, active)
    return second_stage_lm(design, active, "F" if variant == "lm-f" else "chi2")


# --- orchestration ----------------------------------------------------------


def _feasible(design: DesignSet, active: ActiveSets) -> bool:
    if second_stage_dof(design, active) < 1:
        return False
    full = np.hstack([design.x_lags, _augmented_controls(design, active)])
    return is_full_rank(full)


def _prune(design: DesignSet, active: ActiveSets):
    """Drop the weakest selected controls (ties by column index) until stage two is feasible."""
    order = sorted(active.union, key=lambda i: (active.strength.get(i, 0.0), i))
    kept = set(active.union)
    dropped = []
    for idx in order:
        if _feasible(design, ActiveSets(active.per_equation, tuple(sorted(kept)), active.c, active.strength)):
            break
        kept.discard(idx)
        dropped.append(idx)
    pruned = ActiveSets(active.per_equation, tuple(sorted(kept)), active.c, active.strength)
    if not _feasible(design, pruned):
        if second_stage_dof(design, pruned) < 1:
            raise InsufficientDof("stage two infeasible even without selected controls")
        raise RankDeficient("stage-two design is rank deficient even without selected controls")
    labels = design.control_labels
    return pruned, tuple(labels[i] for i in dropped)


def select_controls(design: DesignSet, c_ladder: Sequence[float] = C_LADDER, extra_lag: Optional[bool] = None):
    """Stage one with the tightening ladder; returns ``(active, dropped_labels)``."""
    if not c_ladder or any(not 0.0 < c < 1.0 for c in c_ladder):
        raise UsageError("c_ladder needs at least one bound, each in (0, 1)")
    stage = _run_first_stage(design, _resolve_extra_lag(design, extra_lag), max(c_ladder))
    active = None
    for c in c_ladder:
        try:
            active = _select(stage, c)
        except AllViolateBound:
            continue
        if _feasible(design, active):
            return active, ()
    if active is None:
        raise AllViolateBound(f"every lambda violates the selection bound for c in {tuple(c_ladder)}")
    return _prune(design, active)


def pds_la_test(
    panel: Panel,
    caused,
    causing,
    cfg: LagConfig,
    variant: str = "lm-f",
    *,
    c_ladder: Sequence[float] = C_LADDER,
    extra_lag: Optional[bool] = None,
) -> GcTestResult:
    """Test whether ``causing`` Granger-causes ``caused`` given every other column of ``panel``.

    ``extra_lag=None`` adds ``x_{-(p+1)}`` to the first-stage regressions
    whenever ``p <= d``; pass ``False`` to disable.
    """
    if variant not in VARIANTS:
        raise UsageError(f"variant must be one of {VARIANTS}, got {variant!r}")
    design = build_design(panel, caused, causing, cfg)
    active, dropped = select_controls(design, c_ladder, extra_lag)
    result = second_stage(design, active, variant)
    result.dropped = dropped
    return result
