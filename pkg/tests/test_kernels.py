import os
import subprocess
import sys

import numpy as np
import pytest

from uacesd import kernels
from uacesd.denoisers import QPSK
from uacesd.kernels import load_backend

PY = load_backend("python")
try:
    CY = load_backend("cython")
except ImportError:  # extension not built
    CY = None

needs_ext = pytest.mark.skipif(CY is None, reason="compiled extension not built")


def _inputs(seed, rows=7, cols=33, scale=1.0):
    rng = np.random.default_rng(seed)
    Q = scale * (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols)))
    V = np.exp(rng.uniform(-12, 3, (rows, cols)))
    return Q, V


@needs_ext
class TestBackendAgreement:
    """Compiled kernels reproduce the numpy reference."""

    # exponents reach |q|^2 / V ~ 1e9 at scale 100, so agreement is ~1e-7 there
    @pytest.mark.parametrize("scale,rtol", [(0.1, 1e-10), (1.0, 1e-10), (100.0, 1e-6)])
    def test_discrete(self, scale, rtol):
        Q, V = _inputs(1, scale=scale)
        logw = np.log(np.array([0.1, 0.2, 0.3, 0.4]))
        for a, b in zip(PY.discrete_posterior(Q, V, QPSK, logw),
                        CY.discrete_posterior(Q, V, QPSK, logw)):
            np.testing.assert_allclose(a, b, rtol=rtol, atol=rtol * 1e-2)

    @pytest.mark.parametrize("full", [False, True])
    @pytest.mark.parametrize("scale", [0.1, 1.0, 100.0])
    def test_bernoulli_gaussian(self, full, scale):
        Q, V = _inputs(2, scale=scale)
        for a, b in zip(PY.bg_posterior(Q, V, 0.07, 1.3, full),
                        CY.bg_posterior(Q, V, 0.07, 1.3, full)):
            np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-14)

    def test_viterbi(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            llr = rng.standard_normal((rng.integers(3, 80), 2)) * 4
            np.testing.assert_array_equal(PY.viterbi57(llr), CY.viterbi57(llr))

    def test_viterbi_ties(self):
        llr = np.zeros((10, 2))
        np.testing.assert_array_equal(PY.viterbi57(llr), CY.viterbi57(llr))


class TestBackendSelection:
    """Import-time selection and the pure-Python override."""

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            load_backend("fortran")

    def test_env_forces_python(self):
        env = dict(os.environ, UACESD_PURE_PYTHON="1")
        out = subprocess.run([sys.executable, "-c", "import uacesd; print(uacesd.BACKEND)"],
                             env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "python"

    def test_default_prefers_extension(self):
        if os.environ.get("UACESD_PURE_PYTHON"):
            pytest.skip("override active")
        assert kernels.BACKEND == ("cython" if CY is not None else "python")

    def test_wrappers_accept_noncontiguous(self):
        Q, V = _inputs(4, rows=6, cols=8)
        m1, _, _ = kernels.discrete_posterior(Q[:, ::2], V[:, ::2], QPSK, np.log(np.full(4, 0.25)))
        m2, _, _ = PY.discrete_posterior(np.ascontiguousarray(Q[:, ::2]),
                                         np.ascontiguousarray(V[:, ::2]), QPSK,
                                         np.log(np.full(4, 0.25)))
        np.testing.assert_allclose(m1, m2, rtol=1e-12)
