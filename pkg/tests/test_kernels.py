import math
import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from dissgadgets import _accel, kernels
from dissgadgets.classical import initializer_generator

needs_numba = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


@needs_numba
class TestBackendAgreement:
    def test_gamma_grid(self):
        a = np.repeat([0.5, 3.0, 40.0, 2500.0, 3e5], 7)
        x = a * np.tile([0.0, 0.1, 0.8, 1.0, 1.2, 3.0, 10.0], 5)
        p1, q1 = kernels.gamma_pq_numpy(a, x)
        p2, q2 = kernels.gamma_pq_numba(a, x)
        np.testing.assert_allclose(p1, p2, rtol=1e-12, atol=1e-300)
        np.testing.assert_allclose(q1, q2, rtol=1e-12, atol=1e-300)

    @settings(max_examples=40, deadline=None)
    @given(a=st.floats(0.05, 1e5), r=st.floats(0.0, 5.0))
    def test_gamma_random(self, a, r):
        p1, q1 = kernels.gamma_pq_numpy(a, r * a)
        p2, q2 = kernels.gamma_pq_numba(a, r * a)
        assert p1 == pytest.approx(p2, rel=1e-12, abs=1e-300)
        assert q1 == pytest.approx(q2, rel=1e-12, abs=1e-300)

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(1, 10**5), r=st.floats(0.0, 3.0))
    def test_poisson_upper(self, n, r):
        a = kernels.poisson_upper_numpy(n, r * n)
        b = kernels.poisson_upper_numba(n, r * n)
        assert float(a) == pytest.approx(float(b), rel=1e-12, abs=1e-300)

    def test_uniformize(self):
        gen = initializer_generator(50, 1.0, 2.0)
        lam = gen.max_exit_rate()
        P = sp.csr_matrix(sp.identity(gen.size) + gen.Q / lam)
        p0 = np.random.default_rng(0).dirichlet(np.ones(gen.size))
        for t in (0.01, 1.0, 7.0):
            a = kernels.uniformize_numpy(P, lam, p0, t, 1e-13)
            b = kernels.uniformize_numba(P, lam, p0, t, 1e-13)
            np.testing.assert_allclose(a, b, atol=1e-13)


class TestPoissonUpper:
    @pytest.mark.parametrize("n,x", [(1, 0.5), (3, 2.0), (10, 4.0), (50, 70.0)])
    def test_finite_sum(self, n, x):
        want = 1.0 - sum(math.exp(-x) * x**k / math.factorial(k) for k in range(n))
        assert float(kernels.poisson_upper(n, x)) == pytest.approx(want, rel=1e-12)

    def test_zero(self):
        assert float(kernels.poisson_upper(5, 0.0)) == 0.0


class TestFallbackSwitch:
    def test_env_flag_selects_numpy(self):
        env = dict(os.environ, **{_accel.DISABLE_ENV: "1"})
        code = (
            "from dissgadgets import kernels, _accel;"
            "print(_accel.backend_name(), kernels.gamma_pq is kernels.gamma_pq_numpy,"
            " round(float(kernels.poisson_upper(2, 1.0)), 12))"
        )
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        assert out.stdout.split() == ["numpy", "True", "0.264241117657"]

    def test_flag_parsing(self, monkeypatch):
        for val, want in (("1", True), ("yes", True), ("0", False), ("", False)):
            monkeypatch.setenv(_accel.DISABLE_ENV, val)
            assert _accel.numba_disabled_by_env() is want
