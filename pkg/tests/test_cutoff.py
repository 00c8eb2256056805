import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special as sps

from dissgadgets import cutoff as co
from dissgadgets.classical import timer_occupation
from dissgadgets.gadgets import TimerConfig, build_timer
from dissgadgets.lindblad import DensityMatrix, evolve, partial_trace

ALPHA_1 = 0.0945348918918356180  # 1/2 - ln(3/2)


class TestCutoffProfile:
    def test_times(self):
        assert co.cutoff_time(100, 0.0, 2.0) == 50.0
        assert co.cutoff_time(100, 1.5, 1.0) == 115.0
        assert co.cutoff_time(4, -5.0, 1.0) == 0.0

    def test_columns(self):
        prof = co.cutoff_profile(64, 1.0, [-1.0, 0.0, 1.0])
        for x, t, dev, gauss, rem in prof.rows():
            assert dev == pytest.approx(1.0 - timer_occupation(64, t, 1.0), abs=1e-15)
            assert gauss == pytest.approx(0.5 * math.erfc(x / math.sqrt(2)), abs=1e-15)
            assert rem == pytest.approx(abs(dev - gauss), abs=1e-15)
        assert prof.window_constant == pytest.approx(prof.sup_remainder * 8.0)

    def test_far_right_converges(self):
        assert co.cutoff_profile(256, 1.0, [40.0]).deviation[0] < 1e-30

    @pytest.mark.parametrize("N", [64, 256, 1024, 4096])
    def test_center_near_half(self, N):
        dev = co.cutoff_profile(N, 1.0, [0.0]).deviation[0]
        assert abs(dev - 0.5) <= 1.0 / math.sqrt(N)

    def test_remainder_shrinks(self):
        x = np.linspace(-3, 3, 61)
        sups = [co.cutoff_profile(N, 1.0, x).sup_remainder for N in (64, 256, 1024)]
        assert sups[0] > sups[1] > sups[2]
        assert all(1 / 3 <= b / a <= 1 for a, b in zip(sups, sups[1:]))

    @settings(max_examples=25, deadline=None)
    @given(N=st.integers(2, 5000), xs=st.lists(st.floats(-6, 6), min_size=2, max_size=20))
    def test_deviation_nonincreasing(self, N, xs):
        x = np.sort(np.array(xs))
        dev = co.cutoff_profile(N, 1.0, x).deviation
        assert np.all(np.diff(dev) <= 1e-15)

    def test_invalid(self):
        with pytest.raises(ValueError):
            co.cutoff_profile(1, 1.0, [0.0])


class TestSharpThreshold:
    def test_well_before(self):
        assert co.sharp_threshold(0.5, 1024, 1.0) < 1e-10

    def test_well_after(self):
        assert co.sharp_threshold(2.0, 1024, 1.0) > 1 - 1e-10

    @pytest.mark.parametrize("N", [256, 1024, 4096, 16384])
    def test_at_cutoff(self, N):
        assert abs(co.sharp_threshold(1.0, N, 1.0) - 0.5) < 0.05

    def test_monotone_in_n(self):
        Ns = (64, 256, 1024, 4096)
        lo = [co.sharp_threshold(0.9, N, 1.0) for N in Ns]
        hi = [co.sharp_threshold(1.1, N, 1.0) for N in Ns]
        assert all(a > b for a, b in zip(lo, lo[1:]))
        assert all(a < b for a, b in zip(hi, hi[1:]))

    def test_gamma_scaling(self):
        assert co.sharp_threshold(1.1, 500, 3.0) == pytest.approx(co.sharp_threshold(1.1, 500, 1.0), rel=1e-14)

    def test_invalid(self):
        with pytest.raises(ValueError):
            co.sharp_threshold(0.0, 10, 1.0)


class TestSpectrum:
    @pytest.mark.parametrize("N,expected", [(3, (0.5, 32, 16)), (4, (0.5, 100, 25))])
    def test_measured_degeneracy(self, N, expected):
        gap, mult, kernel = co.timer_spectrum_degeneracy(N)
        assert (gap, mult, kernel) == (pytest.approx(expected[0]), expected[1], expected[2])


class TestTricomi:
    def test_reference_point(self):
        r = co.tricomi_bound(5, 10)
        assert r.exact == pytest.approx(0.702064513847065744, rel=1e-13)
        assert r.bound == pytest.approx(math.exp(-10) * 1e5 / 6, rel=1e-14)
        assert r.margin > 0

    @pytest.mark.parametrize("x", [0.5, 2.0, 30.0])
    def test_equality_at_a1(self, x):
        r = co.tricomi_bound(1, x)
        assert r.exact == pytest.approx(math.exp(-x), rel=1e-13)
        assert abs(r.margin) <= 1e-12

    def test_margin_positive_on_grid(self):
        for a in np.linspace(1.5, 100, 40):
            for x in np.linspace(a + 1.01, 3 * a, 15):
                assert co.tricomi_bound(a, x).margin > 0

    @settings(max_examples=50, deadline=None)
    @given(a=st.floats(1.01, 5000.0), r=st.floats(0.0, 1.0))
    def test_margin_positive_random(self, a, r):
        x = a - 1 + 1e-3 + r * 4 * a
        assert co.tricomi_bound(a, x).margin > 0

    def test_validity_region(self):
        with pytest.raises(ValueError):
            co.tricomi_bound(5, 3.5)


class TestConcatenation:
    def test_schedule_windows(self):
        s = co.TriggerSchedule(3, 100, 2.0)
        assert s.windows() == [(25.0, 75.0), (75.0, 125.0), (125.0, 175.0)]
        with pytest.raises(ValueError):
            s.window(4)
        with pytest.raises(ValueError):
            co.TriggerSchedule(0, 100, 1.0)

    def test_alpha_one(self):
        assert co.alpha_rate(1) == pytest.approx(ALPHA_1, rel=1e-14)

    def test_rates_positive_and_ordered(self):
        for l in range(1, 50):
            a, b = co.alpha_rate(l), co.beta_rate(l)
            assert 0 < a < b
            # both rates approach 1/(8 l) for large l
            if l > 20:
                assert a == pytest.approx(1 / (8 * l), rel=0.05)
                assert b == pytest.approx(1 / (8 * l), rel=0.05)

    @pytest.mark.parametrize("l", [1, 3, 12])
    @pytest.mark.parametrize("N", [100, 400])
    def test_tails_match_scipy(self, l, N):
        r = co.concatenation_error(l, N)
        assert r.early == pytest.approx(sps.gammainc(N * l, N * (l - 0.5)), rel=1e-10)
        assert r.late == pytest.approx(sps.gammaincc(N * l, N * (l + 0.5)), rel=1e-10)

    def test_late_example(self):
        r = co.concatenation_error(1, 400)
        assert r.late < math.exp(-0.09 * 400) * 400**2
        assert r.late_degree == 0 and r.early_degree == 0

    def test_certified_for_all_steps(self):
        for N in (100, 400, 1600):
            for l in range(1, 21):
                r = co.concatenation_error(l, N)
                assert r.early_degree is not None and r.late_degree is not None
                assert r.log_late <= -r.alpha * N + 2 * math.log(N * l)
                assert r.log_early <= -r.beta * N + 2 * math.log(N * l)

    def test_rates_independent_of_gamma(self):
        a = co.concatenation_error(2, 200, gamma=1.0)
        b = co.concatenation_error(2, 200, gamma=7.0)
        assert (a.early, a.late) == (b.early, b.late)

    def test_total(self):
        total = co.total_mistrigger(10, 10**4)
        assert 0 < total < 1e-6
        assert total == pytest.approx(sum(co.concatenation_error(l, 10**4).total for l in range(1, 11)))

    def test_invalid(self):
        with pytest.raises(ValueError):
            co.concatenation_error(0, 100)


class TestTruncatedNormal:
    def test_reference_case(self):
        # xi = 2: the integrand peaks inside [0, N], so the interior bound applies
        r = co.truncated_normal_overlap(100, 0.5, 0.25, 1.0, 1.0)
        assert r.regime == "interior"
        assert r.log_numeric <= r.log_bound
        assert r.numeric == pytest.approx(3.6035153491e-13, rel=1e-8)

    @pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
    @pytest.mark.parametrize("beta", [0.1, 0.5])
    def test_quadrature_matches_closed_form(self, alpha, beta):
        for N in (50, 200):
            r = co.truncated_normal_overlap(N, alpha, beta, 1.0, 1e4)
            assert abs(r.log_numeric - r.log_closed_form) <= 1e-8
            assert r.log_numeric <= r.log_bound

    def test_narrow_limit_is_point_mass(self):
        r = co.truncated_normal_overlap(100, 0.5, 1e-6, 1.0, 1.0)
        assert r.log_numeric == pytest.approx(-50 * math.log(2.0), abs=1e-4)

    def test_slope(self):
        Ns = (50, 100, 200)
        for a, b in ((0.25, 0.1), (0.75, 0.5)):
            logs = [co.truncated_normal_overlap(N, a, b, 1.0, 1e4).log_numeric for N in Ns]
            assert co.log_slope(Ns, logs) == pytest.approx(-a * a / (2 * b), rel=0.10)

    @settings(max_examples=30, deadline=None)
    @given(
        N=st.integers(10, 400),
        alpha=st.floats(0.05, 1.0),
        beta=st.floats(0.01, 2.0),
        G=st.floats(0.1, 1e5),
    )
    def test_bound_dominates(self, N, alpha, beta, G):
        r = co.truncated_normal_overlap(N, alpha, beta, 1.0, G)
        assert r.log_numeric <= r.log_bound + 1e-9

    @pytest.mark.parametrize("args", [(100, 0.0, 0.5), (100, 1.5, 0.5), (100, 0.5, 0.0), (0, 0.5, 0.5)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            co.truncated_normal_overlap(*args, 1.0, 1.0)


def quantum_perturbed_trigger(N, eps, t):
    # product input: site 1 ideally |0>, the rest |1>, each flipped with probability eps
    L = build_timer(TimerConfig(N, 1.0))
    factors = [np.diag([1 - eps, eps])] + [np.diag([eps, 1 - eps])] * (N - 1)
    rho = DensityMatrix.product(L.register, factors)
    last = partial_trace(evolve(L, rho, t), [L.register.labels[-1]])
    return last.matrix[0, 0].real


class TestImperfectInit:
    def test_zero_eps(self):
        r = co.imperfect_init_shift(8, 0.0, 8.0)
        assert r.shift == 0.0
        assert r.ideal == pytest.approx(timer_occupation(8, 8.0, 1.0), abs=1e-12)

    @pytest.mark.parametrize("eps", [0.01, 0.08])
    def test_matches_quantum_evolution(self, eps):
        r = co.imperfect_init_shift(4, eps, 3.0)
        assert r.perturbed == pytest.approx(quantum_perturbed_trigger(4, eps, 3.0), abs=1e-10)

    def test_first_order_headroom(self):
        for eps in (1e-3, 1e-4):
            r = co.imperfect_init_shift(8, eps, 8.0)
            assert abs(r.shift) <= 8 * eps + 10 * eps * eps * 64
            assert r.first_order_estimate == 8 * eps

    def test_residual_quadratic(self):
        def ratio(eps):
            return co.imperfect_init_shift(8, 2 * eps, 8.0).residual / co.imperfect_init_shift(8, eps, 8.0).residual

        # cubic terms still matter at 1e-3; the ratio tends to 4 as eps shrinks
        assert 2.0 <= ratio(1e-3) <= 8.0
        assert ratio(1e-4) == pytest.approx(4.0, rel=0.02)

    def test_invalid(self):
        with pytest.raises(ValueError):
            co.imperfect_init_shift(8, 0.2, 1.0)
        with pytest.raises(ValueError):
            co.imperfect_init_shift(21, 0.01, 1.0)
