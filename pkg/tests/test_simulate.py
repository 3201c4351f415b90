import numpy as np
import pytest

from pdsla.errors import ExplosiveDgp, UsageError
from pdsla.simulate import (
    DgpSpec,
    dgp_coefficients,
    macro_fixture,
    make_rng,
    simulate_differences,
    simulate_levels,
    spectral_radius,
    toeplitz_sigma,
)


def test_toeplitz_examples():
    np.testing.assert_array_equal(toeplitz_sigma(4, 0.0), np.eye(4))
    np.testing.assert_allclose(toeplitz_sigma(3, 0.7), [[1, 0.7, 0.49], [0.7, 1, 0.7], [0.49, 0.7, 1]], atol=1e-15)
    S = toeplitz_sigma(10, 0.7)
    L = np.linalg.cholesky(S)
    assert np.max(np.abs(L @ L.T - S)) < 1e-10


def test_dgp1_coefficients():
    np.testing.assert_array_equal(dgp_coefficients(DgpSpec.size_design(1, 2, 10)), [[0.5, 0], [0, 0.5]])
    A = dgp_coefficients(DgpSpec.power_design(1, 10, 10))
    expected = 0.5 * np.eye(10)
    expected[1, 0] = 0.2
    np.testing.assert_array_equal(A, expected)


def test_dgp2_coefficients():
    A = dgp_coefficients(DgpSpec(2, 5, 10))
    assert A[0, 0] == pytest.approx(0.3)
    assert A[0, 2] == pytest.approx(0.027)
    assert A[0, 1] == pytest.approx(-0.09)
    size = dgp_coefficients(DgpSpec.size_design(2, 5, 10))
    assert size[1, 0] == 0.0 and size[0, 1] == pytest.approx(-0.09)
    for K in (10, 20, 50, 100):
        assert spectral_radius(dgp_coefficients(DgpSpec.power_design(2, K, 10))) < 1


def test_explosive_rejected():
    with pytest.raises(ExplosiveDgp):
        simulate_levels(DgpSpec(2, 3, 10, a=0.99))


def test_spec_validation():
    with pytest.raises(UsageError):
        DgpSpec(3, 5, 10)
    with pytest.raises(UsageError):
        DgpSpec(1, 1, 10)
    with pytest.raises(UsageError):
        DgpSpec(1, 5, 10, rho=1.0)


def test_seeded_determinism():
    spec = DgpSpec.size_design(2, 6, 100)
    a = simulate_levels(spec, make_rng(1, "x", 3))
    b = simulate_levels(spec, make_rng(1, "x", 3))
    np.testing.assert_array_equal(a.values, b.values)
    c = simulate_levels(spec, make_rng(1, "x", 4))
    assert not np.array_equal(a.values, c.values)
    assert a.names == tuple(f"z{i}" for i in range(1, 7))


def test_difference_autocorrelation_dgp1():
    spec = DgpSpec.size_design(1, 3, 5000)
    dz = simulate_differences(spec, make_rng(21))
    for k in range(3):
        x = dz[:, k] - dz[:, k].mean()
        assert x[1:] @ x[:-1] / (x @ x) == pytest.approx(0.5, abs=0.05)


def test_levels_variance_grows_linearly():
    spec = DgpSpec.size_design(1, 2, 400)
    finals = {100: [], 400: []}
    for rep in range(300):
        z = simulate_levels(spec, make_rng(31, rep)).values[:, 0]
        finals[100].append(z[99])
        finals[400].append(z[399])
    ratio = np.var(finals[400]) / np.var(finals[100])
    assert 2.5 < ratio < 6.0


def test_error_covariance_converges():
    spec = DgpSpec(1, 10, 10000, rho=0.7, power_coef=0.0)
    dz = simulate_differences(spec, make_rng(41))
    A = dgp_coefficients(spec)
    u = dz[1:] - dz[:-1] @ A.T
    assert np.linalg.norm(np.cov(u.T) - toeplitz_sigma(10, 0.7)) <= 0.1


def test_cumsum_roundtrip():
    spec = DgpSpec.size_design(2, 4, 200)
    dz = simulate_differences(spec, make_rng(51))
    z = simulate_levels(spec, make_rng(51)).values
    np.testing.assert_array_equal(np.diff(z, axis=0), np.diff(np.cumsum(dz, axis=0), axis=0))
    np.testing.assert_array_equal(z[0], dz[0])


def test_macro_fixture_layout():
    panel = macro_fixture(3)
    assert panel.K == 20 and panel.T == 240
    assert panel.names[0] == "UNCERT"
    assert len(panel.tcodes) == 20 and set(panel.tcodes) <= {1, 2, 5}
    for k, code in enumerate(panel.tcodes):
        if code == 5:
            assert np.all(panel.values[:, k] > 0)
    np.testing.assert_array_equal(macro_fixture(3).values, panel.values)
