"""The numba and numpy kernel paths must agree to ulp-level tolerances."""

import numpy as np
import pytest

from t3 import _kernels as K


@pytest.fixture(scope="module")
def z():
    rng = np.random.default_rng(0)
    return rng.normal(0.0, 3.0, size=10_000)


needs_numba = pytest.mark.skipif(not K.NUMBA_ENABLED, reason="numba disabled or missing")


@needs_numba
class TestBackendAgreement:
    def test_gauss_logpdf(self, z):
        a = K.gauss_logpdf_numpy(z, 0.3, 0.7)
        b = K.gauss_logpdf_nb(z, 0.3, 0.7)
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)

    def test_mix2_gauss_logpdf(self, z):
        a = K.mix2_gauss_logpdf_numpy(z, np.log(0.9), 1.0, 1.0, np.log(0.1), 0.0, 1e-3)
        b = K.mix2_gauss_logpdf_nb(z, np.log(0.9), 1.0, 1.0, np.log(0.1), 0.0, 1e-3)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)

    def test_quad_sigmoid(self, z):
        a = K.quad_sigmoid_numpy(z, 0.5, -1.2, 2.0)
        b = K.quad_sigmoid_nb(z, 0.5, -1.2, 2.0)
        np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-15)

    def test_quad_logsigmoid(self, z):
        a = K.quad_logsigmoid_numpy(z, 0.5, -1.2, -2.0)
        b = K.quad_logsigmoid_nb(z, 0.5, -1.2, -2.0)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13)


def test_sigmoid_extreme_arguments_stay_finite():
    z = np.array([-1e4, -50.0, 0.0, 50.0, 1e4])
    out = K.quad_sigmoid(z, 0.0, 1.0, 0.0)
    assert np.all(np.isfinite(out))
    assert np.all((out >= 0.0) & (out <= 1.0))
    logs = K.quad_logsigmoid(z, 0.0, 1.0, 0.0)
    assert np.all(logs <= 0.0)
    assert np.isfinite(logs[0]) or logs[0] == -np.inf
