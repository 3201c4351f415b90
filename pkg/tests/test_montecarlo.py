import numpy as np
import pytest

from pdsla.errors import UsageError
from pdsla.lags import LagConfig
from pdsla.montecarlo import (
    McExperiment,
    format_lag_frequencies,
    format_table1,
    run_lag_frequencies,
    run_replication,
    run_size_power,
    table1_grid,
)
from pdsla.simulate import DgpSpec


def test_full_grid_has_80_cells():
    grid = table1_grid()
    # each (dgp, rho, K, T) cell carries a size and a power experiment
    assert len({(s.kind, s.rho, s.K, s.T) for s in grid}) == 80
    assert len(set(grid)) == 160
    assert sum(s.power_coef == 0.2 for s in grid) == 80


def test_alpha_one_always_rejects():
    exp = McExperiment([DgpSpec.size_design(1, 4, 60)], replications=10, alpha=1.0)
    res = run_size_power(exp)
    assert res.cells[0].frequency == 1.0


def test_experiment_validation():
    with pytest.raises(UsageError):
        McExperiment([], replications=0)
    with pytest.raises(UsageError):
        McExperiment([], alpha=0.0)


def test_reproducible_and_mc_se():
    grid = [DgpSpec.size_design(1, 5, 100), DgpSpec.power_design(1, 5, 100)]
    exp = McExperiment(grid, replications=40, base_seed=3)
    a, b = run_size_power(exp, chunk=7), run_size_power(exp, chunk=40)
    assert a.frequencies() == b.frequencies()
    for cell in a.cells:
        r = cell.frequency
        assert 0.0 <= r <= 1.0
        assert cell.mc_se == pytest.approx(np.sqrt(r * (1 - r) / 40))
    assert a.cells[1].frequency > a.cells[0].frequency


def test_single_replication_rerunnable():
    spec = DgpSpec.power_design(1, 5, 200)
    cfg = LagConfig(3, 2)
    assert run_replication(spec, 17, 9, cfg) == run_replication(spec, 17, 9, cfg)


def test_failures_reported_not_dropped():
    # T = 8 leaves 4 usable rows for p = 2, d = 2
    exp = McExperiment([DgpSpec.size_design(1, 10, 8)], replications=5)
    cell = run_size_power(exp).cells[0]
    assert cell.failures == 5 and cell.rejections == 0 and cell.replications == 5


def test_outputs(tmp_path):
    exp = McExperiment(table1_grid(dgps=(1,), rhos=(0.0,), Ks=(5,), Ts=(60, 80)), replications=5)
    res = run_size_power(exp)
    res.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert len(lines) == 5 and lines[0].startswith("dgp,rho,K,T,design")
    text = format_table1(res.cells)
    assert "S    60" in text and "P    80" in text


def test_lag_frequencies():
    freqs = run_lag_frequencies([DgpSpec.size_design(2, 5, 200)], "bic", replications=30, p_max=6, base_seed=1)
    f = freqs[0]
    assert f.replications == 30
    assert f.frequencies().sum() == pytest.approx(1.0)
    assert f.frequency_below(2) <= 0.1
    assert "p=1" in format_lag_frequencies(freqs)


def test_lag_frequencies_concentrate_at_true_order():
    # an AR(1) in differences is an AR(2) in levels
    f = run_lag_frequencies([DgpSpec.size_design(1, 5, 500)], "bic", replications=30, p_max=5)[0]
    assert f.frequencies()[1] >= 0.9
