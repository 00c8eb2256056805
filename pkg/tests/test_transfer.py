import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dissgadgets import transfer as tr
from dissgadgets.gadgets import Stage, TimerConfig, build_transfer_3qubit, build_transfer_nqubit
from dissgadgets.lindblad import (
    KET0,
    KET1,
    MINUS,
    PLUS,
    DensityMatrix,
    QubitRegister,
    fidelity_with_pure,
    partial_trace,
    trace_distance,
)


def cz(n, a, b):
    d = 2**n
    diag = np.ones(d)
    for idx in range(d):
        if (idx >> (n - 1 - a)) & 1 and (idx >> (n - 1 - b)) & 1:
            diag[idx] = -1
    return np.diag(diag)


class TestCluster:
    def test_single_site(self):
        phi = tr.bloch_state(0.4, 1.0)
        np.testing.assert_allclose(tr.prepare_cluster(phi, 1), phi)

    def test_three_sites_from_zero(self):
        # the first controlled-Z acts trivially on |0>, only the second one matters
        want = cz(3, 1, 2) @ np.kron(KET0, np.kron(PLUS, PLUS))
        np.testing.assert_allclose(tr.prepare_cluster(KET0, 3), want, atol=1e-15)

    def test_gate_application_oracle(self):
        phi = tr.bloch_state(2.0, -0.7)
        want = cz(5, 3, 4) @ cz(5, 2, 3) @ cz(5, 1, 2) @ cz(5, 0, 1) @ np.kron(phi, np.kron(np.kron(PLUS, PLUS), np.kron(PLUS, PLUS)))
        np.testing.assert_allclose(tr.prepare_cluster(phi, 5), want, atol=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), n=st.sampled_from([1, 3, 5, 7]))
    def test_normalized_and_invertible(self, seed, n):
        phi = tr.random_qubit(np.random.default_rng(seed))
        psi = tr.prepare_cluster(phi, n)
        assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-13)
        # undo the entanglers (they are self-inverse) and project the rest onto |+>
        for j in range(n - 1):
            psi = cz(n, j, j + 1) @ psi
        t = psi.reshape(2, -1)
        plus = PLUS
        for _ in range(n - 2):
            plus = np.kron(plus, PLUS)
        out = t @ plus.conj() if n > 1 else psi
        np.testing.assert_allclose(out, phi, atol=1e-13)

    def test_rejects(self):
        with pytest.raises(ValueError):
            tr.prepare_cluster(np.array([1.0, 1.0]), 3)
        with pytest.raises(ValueError):
            tr.prepare_cluster(KET0, 2)


class TestBookkeepingOracle:
    def test_parities(self):
        assert tr.byproduct_parities((1, 0)) == (1, 0)
        assert tr.byproduct_parities((0, 1, 1, 1)) == (1, 0)
        assert tr.byproduct_parities((1, 1, 1, 1)) == (0, 0)

    @pytest.mark.parametrize("n", [3, 5, 7])
    def test_all_patterns_recover_input(self, n):
        rng = np.random.default_rng(n)
        for _ in range(3):
            phi = tr.random_qubit(rng)
            total = 0.0
            for outcomes in itertools.product((0, 1), repeat=n - 1):
                out, prob = tr.measure_and_correct(phi, n, outcomes)
                total += prob
                assert prob == pytest.approx(2.0 ** -(n - 1), abs=1e-14)
                assert tr.overlap_up_to_phase(out, phi) == pytest.approx(1.0, abs=1e-13)
            assert total == pytest.approx(1.0)

    def test_swapped_recovery_fails(self):
        phi = tr.bloch_state(1.2, 0.5)
        out, _ = tr.measure_and_correct(phi, 3, (1, 0), recovery={"01": "z", "10": "x", "11": "zx"})
        assert tr.overlap_up_to_phase(out, phi) < 0.99

    def test_wrong_outcome_count(self):
        with pytest.raises(ValueError):
            tr.measure_and_correct(KET0, 3, (0,))


class TestSequential:
    def test_damping_stage_time(self):
        reg = QubitRegister(("q",))
        tol = 1e-9
        rho, (res,) = tr.run_sequential([tr.damping_stage(reg, "q", 1.0)], DensityMatrix.basis(reg, [1]), tol)
        assert rho.matrix[0, 0].real == pytest.approx(1.0, abs=1e-8)
        # generator norm on this branch is 2 e^{-t}
        t_star = math.log(2.0 / tol)
        assert t_star <= res.time <= 1.5 * t_star
        assert res.generator_norm <= tol

    def test_budget_exceeded(self):
        reg = QubitRegister(("q",))
        with pytest.raises(RuntimeError):
            tr.run_sequential([tr.damping_stage(reg, "q", 1.0)], DensityMatrix.basis(reg, [1]), 1e-9, budget=3.0)

    def test_register_mismatch(self):
        reg = QubitRegister(("q",))
        with pytest.raises(ValueError):
            tr.run_sequential([tr.damping_stage(QubitRegister(("p",)), "p", 1.0)], DensityMatrix.basis(reg, [1]))

    def test_invalid_tolerance(self):
        reg = QubitRegister(("q",))
        with pytest.raises(ValueError):
            tr.run_stage(tr.damping_stage(reg, "q", 1.0), DensityMatrix.basis(reg, [1]), 0.0)

    def test_deterministic(self):
        reg = QubitRegister(("q",))
        stages = [tr.damping_stage(reg, "q", 0.7), tr.flip_stage(reg, "q", 1.3)]
        a, ra = tr.run_sequential(stages, DensityMatrix.basis(reg, [1]))
        b, rb = tr.run_sequential(stages, DensityMatrix.basis(reg, [1]))
        np.testing.assert_array_equal(a.matrix, b.matrix)
        assert [r.time for r in ra] == [r.time for r in rb]


class TestThreeQubitTransfer:
    def test_stage_a_even_mixture(self):
        A, _ = build_transfer_3qubit(1.0)
        rho0 = tr.transfer3_initial_state(KET0)
        rho, _ = tr.run_sequential([Stage("A", A)], rho0)
        reg = partial_trace(rho, ["q4", "q5"])
        np.testing.assert_allclose(reg.diagonal(), 0.25, atol=1e-8)
        off = reg.matrix - np.diag(np.diag(reg.matrix))
        assert np.abs(off).max() <= 1e-9
        # each registry branch carries the byproduct-modified input on q3
        for pattern in itertools.product((0, 1), repeat=2):
            proj = np.kron(np.eye(8), np.outer(np.eye(4)[2 * pattern[0] + pattern[1]], np.eye(4)[2 * pattern[0] + pattern[1]]))
            branch = proj @ rho.matrix @ proj
            branch = DensityMatrix(rho.register, branch / np.trace(branch).real, tol=1e-8)
            q3 = partial_trace(branch, ["q3"])
            z, x = pattern
            want = np.linalg.matrix_power(np.diag([1.0, -1.0]), z) @ np.linalg.matrix_power(np.array([[0, 1], [1, 0]]), x) @ KET0
            assert fidelity_with_pure(q3, want) == pytest.approx(1.0, abs=1e-8)

    def test_zero_input(self):
        run = tr.run_transfer3(KET0)
        assert run.fidelity >= 1 - 1e-6
        assert run.registry_populations["00"] == pytest.approx(1.0, abs=1e-8)
        assert run.stages == ["A", "B"] and len(run.stage_times) == 2
        assert tr.transfer_fidelity(run) == run.fidelity

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_random_inputs(self, seed):
        phi = tr.random_qubit(np.random.default_rng(seed))
        assert tr.run_transfer3(phi).fidelity >= 1 - 1e-6

    def test_global_phase_invariance(self):
        phi = tr.bloch_state(1.1, 2.3)
        a = tr.run_transfer3(phi).fidelity
        b = tr.run_transfer3(np.exp(0.77j) * phi).fidelity
        assert a == pytest.approx(b, abs=1e-12)

    def test_wrong_order_negative_control(self):
        phi = tr.bloch_state(1.1, 2.3)
        run = tr.run_transfer3(phi, order="BA")
        assert run.fidelity < 0.99

    def test_json_report(self):
        run = tr.run_transfer3(KET1)
        data = json.loads(json.dumps(run.to_json_dict()))
        assert data["n"] == 3 and data["fidelity"] == pytest.approx(run.fidelity)
        assert set(data["registry_populations"]) == {"00", "01", "10", "11"}

    def test_unexecuted_run(self):
        run = tr.TransferRun(3, KET0, ["A", "B"], 1e-9)
        with pytest.raises(ValueError):
            tr.transfer_fidelity(run)


@pytest.mark.slow
class TestBusTransfer:
    def test_n3_bus_protocol(self):
        phi = tr.bloch_state(0.9, 1.7)
        pre = tr.run_transfer_n(phi, 3, stop_before_recovery=True)
        # bus bits hold the byproduct parities of the sampled branch
        assert tr.bus_parity_mismatch(pre.rho_final, 3) <= 1e-8
        recovery = build_transfer_nqubit(3, 1.0)[-1]
        rho, _ = tr.run_sequential([recovery], pre.rho_final)
        out = partial_trace(rho, ["l3"])
        assert fidelity_with_pure(out, phi) >= 1 - 1e-6

    def test_n5_too_large(self):
        with pytest.raises(ValueError):
            tr.run_transfer_n(KET0, 5)


class TestTimerTriggered:
    def test_register_layout(self):
        reg = QubitRegister(("p",))
        comp = tr.build_timer_triggered([tr.damping_stage(reg, "p", 1.0)], [TimerConfig(3, 0.1)])
        assert comp.liouvillian.register.labels == ("p", "T1_1", "T1_2", "T1_3")
        cond = [op for op in comp.liouvillian.operators if op.tag.startswith("damp")]
        assert cond[0].support == {"p", "T1_3"}

    def test_suppressed_early(self):
        omega = 1.0
        gamma = omega / 50
        reg = QubitRegister(("p",))
        rho0 = DensityMatrix.basis(reg, [1])
        for t in (0.01 / gamma, 0.05 / gamma):
            out = tr.run_timer_triggered([tr.damping_stage(reg, "p", omega)], [TimerConfig(2, gamma)], rho0, t)
            assert out.trace == pytest.approx(1.0, abs=1e-10)
            assert fidelity_with_pure(out, KET1) >= 1 - 3 * t * gamma

    def test_longer_timer_suppresses_more(self):
        gamma, t = 0.02, 10.0
        reg = QubitRegister(("p",))
        rho0 = DensityMatrix.basis(reg, [1])
        d = [
            trace_distance(tr.run_timer_triggered([tr.damping_stage(reg, "p", 1.0)], [TimerConfig(N, gamma)], rho0, t), rho0)
            for N in (2, 3, 4)
        ]
        assert d[0] > d[1] > d[2]

    def test_two_stage_pipeline_reports_state(self):
        # damp then flip with N=2 and N=4 timers; the distance to sequential is reported, not bounded tightly
        omega, gamma = 1.0, 0.02
        reg = QubitRegister(("p",))
        stages = [tr.damping_stage(reg, "p", omega), tr.flip_stage(reg, "p", omega)]
        rho0 = DensityMatrix.from_pure(reg, PLUS)
        out = tr.run_timer_triggered(stages, [TimerConfig(2, gamma), TimerConfig(4, gamma)], rho0, 8.0 / gamma, tol=1e-8)
        seq, _ = tr.run_sequential(stages, rho0)
        assert out.trace == pytest.approx(1.0, abs=1e-8)
        assert np.linalg.eigvalsh(out.matrix)[0] >= -1e-8
        assert fidelity_with_pure(seq, MINUS) == pytest.approx(1.0, abs=1e-8)
        print(f"two-stage composite vs sequential trace distance {trace_distance(out, seq):.4f}")

    def test_mismatched_timers(self):
        reg = QubitRegister(("p",))
        with pytest.raises(ValueError):
            tr.build_timer_triggered([tr.damping_stage(reg, "p", 1.0)], [])
        with pytest.raises(ValueError):
            tr.build_timer_triggered([], [])

    def test_too_large(self):
        reg = QubitRegister(("p",))
        with pytest.raises(ValueError):
            tr.build_timer_triggered([tr.damping_stage(reg, "p", 1.0)] * 3, [TimerConfig(4, 0.1)] * 3)
