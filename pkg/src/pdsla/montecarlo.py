"""Replication harness for size/power tables and lag-selection frequencies.

Each replication draws from its own generator seeded by
``(base_seed, design key, replication index)``, so any single replication can
be re-run in isolation and results do not depend on worker scheduling.
"""

from __future__ import annotations

import csv
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from pdsla.errors import PdslaError, UsageError
from pdsla.lags import LagConfig
from pdsla.lagselect import select_lag
from pdsla.lasso import C_LADDER
from pdsla.pds import pds_la_test
from pdsla.simulate import DgpSpec, make_rng, simulate_levels

logger = logging.getLogger(__name__)

TABLE1_T = (50, 100, 200, 500, 1000)
TABLE1_K = (10, 20, 50, 100)
TABLE1_RHO = (0.0, 0.7)


@dataclass
class McExperiment:
    grid: Sequence[DgpSpec]
    replications: int = 1000
    alpha: float = 0.05
    p: int = 2
    d: int = 2
    variant: str = "lm-f"
    c_ladder: tuple = C_LADDER
    base_seed: int = 0
    extra_lag: Optional[bool] = False
    intercept: bool = False

    def __post_init__(self):
        if self.replications < 1:
            raise UsageError("replications must be >= 1")
        if not 0.0 < self.alpha <= 1.0:
            raise UsageError("alpha must lie in (0, 1]")


@dataclass
class McCell:
    spec: DgpSpec
    design: str  # "size" or "power"
    replications: int
    rejections: int
    failures: int
    wall_time: float = 0.0

    @property
    def frequency(self) -> float:
        return self.rejections / self.replications

    @property
    def mc_se(self) -> float:
        r = self.frequency
        return math.sqrt(r * (1.0 - r) / self.replications)

    def row(self) -> dict:
        return {
            "dgp": self.spec.kind,
            "rho": self.spec.rho,
            "K": self.spec.K,
            "T": self.spec.T,
            "design": self.design,
            "replications": self.replications,
            "rejections": self.rejections,
            "failures": self.failures,
            "frequency": self.frequency,
            "mc_se": self.mc_se,
        }


@dataclass
class McResult:
    cells: list
    alpha: float
    base_seed: int
    wall_time: float = 0.0

    def frequencies(self) -> list:
        return [c.frequency for c in self.cells]

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            fields = list(McCell(DgpSpec(1, 2, 1), "size", 1, 0, 0).row())
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            for cell in self.cells:
                writer.writerow(cell.row())

    def to_text(self) -> str:
        return format_table1(self.cells)


def design_label(spec: DgpSpec) -> str:
    if spec.power_coef is None or spec.power_coef == 0.0:
        return "size"
    return "power"


def table1_grid(
    dgps=(1, 2), rhos=TABLE1_RHO, Ks=TABLE1_K, Ts=TABLE1_T, designs=("size", "power")
) -> list:
    grid = []
    for design in designs:
        for rho in rhos:
            for kind in dgps:
                for K in Ks:
                    for T in Ts:
                        maker = DgpSpec.size_design if design == "size" else DgpSpec.power_design
                        grid.append(maker(kind, K, T, rho))
    return grid


def run_replication(spec: DgpSpec, rep: int, base_seed: int, cfg: LagConfig, variant: str = "lm-f",
                    alpha: float = 0.05, c_ladder=C_LADDER, extra_lag: Optional[bool] = False):
    """One draw: simulate, test variable 1 -> variable 2, return ``(rejected, failed)``."""
    panel = simulate_levels(spec, make_rng(base_seed, spec.key(), rep))
    try:
        result = pds_la_test(panel, "z2", "z1", cfg, variant, c_ladder=c_ladder, extra_lag=extra_lag)
    except PdslaError as exc:
        logger.debug("replication %d of %s failed: %s", rep, spec.key(), exc)
        return False, True
    return result.p_value <= alpha if alpha >= 1.0 else result.p_value < alpha, False


def _size_power_task(args):
    cell_idx, spec, reps, exp = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = LagConfig(exp.p, exp.d, intercept=exp.intercept)
    rejections = failures = 0
    for rep in reps:
        rejected, failed = run_replication(
            spec, rep, exp.base_seed, cfg, exp.variant, exp.alpha, exp.c_ladder, exp.extra_lag
        )
        rejections += rejected
        failures += failed
    return cell_idx, rejections, failures


def _chunks(n: int, size: int):
    return [range(i, min(i + size, n)) for i in range(0, n, size)]


def _map(fn, tasks, workers: int):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def run_size_power(experiment: McExperiment, workers: int = 1, chunk: int = 50,
                   progress: Optional[Callable[[McCell], None]] = None) -> McResult:
    """Rejection frequency per design cell; failed replications count as non-rejections."""
    start = time.perf_counter()
    cells = []
    for idx, spec in enumerate(experiment.grid):
        t0 = time.perf_counter()
        tasks = [(idx, spec, reps, experiment) for reps in _chunks(experiment.replications, chunk)]
        outputs = _map(_size_power_task, tasks, workers)
        cell = McCell(
            spec=spec,
            design=design_label(spec),
            replications=experiment.replications,
            rejections=sum(o[1] for o in outputs),
            failures=sum(o[2] for o in outputs),
            wall_time=time.perf_counter() - t0,
        )
        cells.append(cell)
        if progress is not None:
            progress(cell)
    return McResult(cells, experiment.alpha, experiment.base_seed, time.perf_counter() - start)


@dataclass
class LagFrequencies:
    spec: DgpSpec
    criterion: str
    counts: np.ndarray  # counts[p - 1] for p = 1..p_max
    failures: int = 0

    @property
    def replications(self) -> int:
        return int(self.counts.sum()) + self.failures

    def frequency_below(self, p: int) -> float:
        return float(self.counts[: p - 1].sum()) / self.replications

    def frequencies(self) -> np.ndarray:
        return self.counts / self.replications


def _lag_task(args):
    spec, reps, base_seed, criterion, p_max = args
    counts = np.zeros(p_max, dtype=np.int64)
    failures = 0
    for rep in reps:
        panel = simulate_levels(spec, make_rng(base_seed, "lagselect", spec.key(), rep))
        try:
            sel = select_lag(panel, p_max, criterion)
        except PdslaError:
            failures += 1
            continue
        counts[sel.p_chosen - 1] += 1
    return counts, failures


def run_lag_frequencies(grid: Sequence[DgpSpec], criterion: str = "bic", replications: int = 500,
                        p_max: int = 10, base_seed: int = 0, workers: int = 1, chunk: int = 100) -> list:
    """Distribution of the chosen lag order over replications, one entry per design."""
    out = []
    for spec in grid:
        tasks = [(spec, reps, base_seed, criterion, p_max) for reps in _chunks(replications, chunk)]
        outputs = _map(_lag_task, tasks, workers)
        counts = sum((o[0] for o in outputs), np.zeros(p_max, dtype=np.int64))
        out.append(LagFrequencies(spec, criterion, counts, sum(o[1] for o in outputs)))
    return out


def format_table1(cells: Sequence[McCell]) -> str:
    """Aligned text: rows DGP x rho x K, columns T, size block then power block (percent)."""
    lookup = {(c.design, c.spec.kind, c.spec.rho, c.spec.K, c.spec.T): c for c in cells}
    Ts = sorted({c.spec.T for c in cells})
    rows = sorted({(c.spec.rho, c.spec.kind, c.spec.K) for c in cells})
    designs = [d for d in ("size", "power") if any(c.design == d for c in cells)]
    head = f"{'DGP':>3} {'rho':>4} {'K':>4} |"
    for d in designs:
        head += " " + " ".join(f"{d[0].upper()}{T:>6}" for T in Ts) + " |"
    lines = [head, "-" * len(head)]
    for rho, kind, K in rows:
        line = f"{kind:>3} {rho:>4.1f} {K:>4} |"
        for d in designs:
            vals = []
            for T in Ts:
                cell = lookup.get((d, kind, rho, K, T))
                vals.append(f"{100 * cell.frequency:>7.1f}" if cell else f"{'':>7}")
            line += " " + " ".join(vals) + " |"
        lines.append(line)
    return "\n".join(lines) + "\n"


def format_lag_frequencies(freqs: Sequence[LagFrequencies]) -> str:
    if not freqs:
        return ""
    p_max = freqs[0].counts.shape[0]
    head = f"{'K':>4} {'T':>5} {'crit':>4} | " + " ".join(f"p={p:<4}" for p in range(1, p_max + 1))
    lines = [head, "-" * len(head)]
    for f in freqs:
        vals = " ".join(f"{v:<6.3f}" for v in f.frequencies())
        lines.append(f"{f.spec.K:>4} {f.spec.T:>5} {f.criterion:>4} | {vals}")
    return "\n".join(lines) + "\n"
