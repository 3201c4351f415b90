import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pdsla.errors import TooShortSample, UsageError
from pdsla.lags import (
    LagConfig,
    build_design,
    build_P,
    build_P_inverse,
    build_R,
    difference_transform,
    lag_block,
    transform_lag_block,
)
from pdsla.panel import Panel


def _panel(T, K, seed=0):
    rng = np.random.default_rng(seed)
    return Panel(np.cumsum(rng.normal(size=(T, K)), axis=0), [f"v{i}" for i in range(K)])


def test_minimal_design_k2():
    panel = _panel(20, 2)
    ds = build_design(panel, "v0", "v1", LagConfig(1, 0))
    assert ds.x_lags.shape == (19, 1) and ds.y_lags.shape == (19, 1)
    assert ds.w_lags.shape == (19, 0) and ds.x_aug.shape == (19, 0)
    np.testing.assert_array_equal(ds.x_lags[:, 0], panel.values[:-1, 1])
    np.testing.assert_array_equal(ds.y, panel.values[1:, 0])


def test_trimmed_bookkeeping_p2_d2():
    panel = _panel(100, 3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ds = build_design(panel, "v0", "v1", LagConfig(2, 2))
    assert ds.t_eff == 96
    x = panel.values[:, 1]
    np.testing.assert_array_equal(ds.x_aug[:, 0], x[4 - 3 : 100 - 3])
    np.testing.assert_array_equal(ds.x_aug[:, 1], x[0:96])
    assert ds.w_labels == (("v2", 1), ("v2", 2))


def test_elementwise_alignment_against_raw_series():
    panel = _panel(40, 4, seed=5)
    ds = build_design(panel, 2, 0, LagConfig(2, 1))
    x, y = panel.values[:, 0], panel.values[:, 2]
    for r, t in enumerate(range(3, 40)):
        assert ds.y[r] == y[t]
        assert tuple(ds.x_lags[r]) == (x[t - 1], x[t - 2])
        assert ds.x_aug[r, 0] == x[t - 3]
        assert tuple(ds.y_lags[r]) == (y[t - 1], y[t - 2])
        w = [panel.values[t - j, k] for k in (1, 3) for j in (1, 2)]
        assert tuple(ds.w_lags[r]) == tuple(w)


def test_zero_fill_keeps_all_rows():
    panel = _panel(10, 2)
    ds = build_design(panel, "v0", "v1", LagConfig(2, 0, trim_initial=False))
    assert ds.t_eff == 10
    assert ds.x_lags[0, 0] == 0.0 and ds.x_lags[1, 1] == 0.0
    assert ds.x_lags[1, 0] == panel.values[0, 1]


def test_config_errors_and_warning():
    with pytest.raises(UsageError, match="d <= 2"):
        LagConfig(2, 3)
    with pytest.raises(UsageError):
        LagConfig(0, 0)
    with pytest.warns(UserWarning, match="spurious"):
        LagConfig(2, 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert LagConfig(2, 2).needs_extra_lag
    assert not LagConfig(3, 2).needs_extra_lag
    with pytest.raises(UsageError):
        build_design(_panel(20, 2), "v0", "v0", LagConfig(1))
    with pytest.raises(TooShortSample):
        build_design(_panel(6, 2), "v0", "v1", LagConfig(2, 0))


def test_P_examples():
    np.testing.assert_array_equal(build_P(2, 1), [[1, 1], [0, 1]])
    np.testing.assert_array_equal(build_P(4, 2), [[1, 2, 3, 4], [0, 1, 2, 3], [0, 0, 1, 2], [0, 0, 0, 1]])
    for n in (1, 3, 6):
        np.testing.assert_array_equal(build_P(n, 0), np.eye(n, dtype=int))
    assert build_P(4, 2).dtype.kind == "i"


def test_worked_differencing_examples():
    # symbolic check with distinct integers standing in for x_{t-1}, x_{t-2}, ...
    x1, x2, x3, x4 = 101, 37, 13, 5
    np.testing.assert_array_equal(difference_transform([x1, x2], 1), [x1 - x2, x2])
    np.testing.assert_array_equal(difference_transform([x1, x2, x3], 1), [x1 - x2, x2 - x3, x3])
    np.testing.assert_array_equal(
        difference_transform([x1, x2, x3, x4], 2),
        [x1 - 2 * x2 + x3, x2 - 2 * x3 + x4, x3 - 2 * x4, x4],
    )


def test_transform_lag_block_is_rowwise():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(7, 4))
    out = transform_lag_block(X, 2)
    for r in range(7):
        np.testing.assert_allclose(out[r], difference_transform(X[r], 2), atol=1e-12)


@pytest.mark.parametrize("n", range(1, 7))
@pytest.mark.parametrize("d", range(0, 5))
def test_P_inverse_exact(n, d):
    P, Pinv = build_P(n, d), build_P_inverse(n, d)
    assert P.dtype.kind == "i" and Pinv.dtype.kind == "i"
    np.testing.assert_array_equal(P @ Pinv, np.eye(n, dtype=int))
    np.testing.assert_array_equal(Pinv @ P, np.eye(n, dtype=int))


@pytest.mark.parametrize("p", range(1, 5))
@pytest.mark.parametrize("d", range(0, 5))
def test_selector_times_P_is_power_of_selector_times_R(p, d):
    # M = (I_p, 0): the top p rows of P_d are R_{pxp}^d padded on the right
    n = p + d
    M = np.hstack([np.eye(p, dtype=int), np.zeros((p, d), dtype=int)])
    MP = M @ build_P(n, d)
    np.testing.assert_array_equal(MP[:, :p], np.linalg.matrix_power(build_R(p), d))
    # each of the first p rows of the inverse is a d-th difference stencil
    from math import comb

    stencil = [(-1) ** k * comb(d, k) for k in range(d + 1)]
    Pinv = build_P_inverse(n, d)
    for r in range(p):
        np.testing.assert_array_equal(Pinv[r, r : r + d + 1], stencil)


def test_lag_block_zero_fill():
    s = np.arange(1.0, 6.0)
    out = lag_block(s, 1, 2, np.arange(5))
    np.testing.assert_array_equal(out[:, 0], [0, 1, 2, 3, 4])
    np.testing.assert_array_equal(out[:, 1], [0, 0, 1, 2, 3])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), p=st.integers(1, 3), d=st.integers(0, 2), K=st.integers(2, 5))
def test_design_shapes(seed, p, d, K):
    panel = _panel(40, K, seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ds = build_design(panel, 0, 1, LagConfig(p, d))
    assert ds.t_eff == 40 - p - d
    assert ds.x_full.shape == (ds.t_eff, p + d)
    assert ds.w_lags.shape == (ds.t_eff, (K - 2) * p)
    assert len(ds.control_labels) == ds.controls.shape[1] == (K - 1) * p
