"""Measurement-based state transfer along a cluster chain, run dissipatively stage by stage."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gadgets import (
    DEFAULT_RECOVERY,
    LOWER,
    PAULIS,
    Stage,
    build_conditional,
    build_timer,
    build_transfer_3qubit,
    build_transfer_nqubit,
    timer_initial_state,
)
from .lindblad import (
    MINUS,
    PLUS,
    DensityMatrix,
    Liouvillian,
    LindbladOperator,
    QubitRegister,
    _trace_norm,
    apply_generator,
    evolve,
    fidelity_with_pure,
    lift,
    partial_trace,
    trace_distance,
)

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)
DEFAULT_EQ_TOL = 1e-9
BUDGET_FACTOR = 100.0
MAX_TRANSFER_QUBITS = 12


def bloch_state(theta, phi):
    """cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>."""
    return np.array([math.cos(theta / 2.0), np.exp(1j * phi) * math.sin(theta / 2.0)], dtype=complex)


def random_qubit(rng):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return v / np.linalg.norm(v)


def _check_qubit(phi_in, tol=1e-10):
    phi_in = np.asarray(phi_in, dtype=complex)
    if phi_in.shape != (2,):
        raise ValueError("input must be a single-qubit state vector")
    if abs(np.linalg.norm(phi_in) - 1.0) > tol:
        raise ValueError("input state is not normalized")
    return phi_in


def _apply_1q(psi, op, site, n):
    t = psi.reshape((2,) * n)
    t = np.moveaxis(np.tensordot(op, t, axes=([1], [site])), 0, site)
    return t.reshape(-1)


def _apply_cz(psi, a, b, n):
    t = psi.reshape((2,) * n).copy()
    idx = [slice(None)] * n
    idx[a] = 1
    idx[b] = 1
    t[tuple(idx)] *= -1
    return t.reshape(-1)


def prepare_cluster(phi_in, n):
    """phi_in on site 1, |+> elsewhere, then controlled-Z on every neighbouring pair."""
    phi_in = _check_qubit(phi_in)
    if n < 1 or n % 2 == 0:
        raise ValueError("chain length must be odd and positive")
    psi = phi_in
    for _ in range(n - 1):
        psi = np.kron(psi, PLUS)
    for j in range(n - 1):
        psi = _apply_cz(psi, j, j + 1, n)
    return psi


def byproduct_parities(outcomes):
    """(z parity from odd steps, x parity from even steps) of outcomes s_1 .. s_{n-1}."""
    z = sum(outcomes[0::2]) % 2
    x = sum(outcomes[1::2]) % 2
    return z, x


def correction_pauli(outcomes, recovery=None):
    recovery = DEFAULT_RECOVERY if recovery is None else recovery
    z, x = byproduct_parities(outcomes)
    key = f"{z}{x}"
    return PAULIS["i"] if key == "00" else PAULIS[recovery[key]]


def measure_and_correct(phi_in, n, outcomes, recovery=None):
    """Pure-state oracle: x-measure sites 1..n-1 with the given outcomes, correct the last site.

    Returns (normalized corrected output, probability of the outcome pattern).
    """
    if len(outcomes) != n - 1:
        raise ValueError("need one outcome per measured site")
    psi = prepare_cluster(phi_in, n)
    t = psi.reshape((2,) * n)
    for j, s in enumerate(outcomes):
        bra = (MINUS if s else PLUS).conj()
        t = np.tensordot(bra, t, axes=([0], [0]))
    out = t.reshape(2)
    prob = float(np.vdot(out, out).real)
    out = correction_pauli(outcomes, recovery) @ (out / math.sqrt(prob))
    return out, prob


def overlap_up_to_phase(a, b):
    return float(abs(np.vdot(a, b)) ** 2)


# ---------------------------------------------------------------------------
# sequential dissipative runs


@dataclass(frozen=True)
class StageResult:
    name: str
    time: float
    generator_norm: float


def _generator_norm(L, rho):
    return _trace_norm(apply_generator(L, rho, tol=1e-6))


def run_stage(L, rho, eq_tol=DEFAULT_EQ_TOL, budget=None, name=""):
    """Evolve under one stage until ||L(rho)||_1 <= eq_tol.

    The first chunk lasts 1/(2 min_rate). Later chunks aim at the remaining
    time predicted from the observed exponential decay of the generator norm,
    stretched by 10% and capped at four times the previous chunk. The recorded
    time is the end of the first chunk that meets the criterion.
    """
    if not eq_tol > 0:
        raise ValueError("eq_tol must be positive")
    rate = L.min_rate()
    if rate == 0:
        return rho, StageResult(name, 0.0, 0.0)
    budget = BUDGET_FACTOR / rate if budget is None else budget
    dt = 0.5 / rate
    tol = min(1e-10, 0.1 * eq_tol)
    t = 0.0
    norm = _generator_norm(L, rho)
    while norm > eq_tol:
        if t >= budget:
            raise RuntimeError(f"stage {name!r} did not equilibrate within time {budget}")
        dt = min(dt, budget - t) if t + dt > budget else dt
        rho = evolve(L, rho, dt, tol=tol)
        t += dt
        prev, norm = norm, _generator_norm(L, rho)
        if norm > eq_tol:
            decay = math.log(prev / norm) / dt if norm < prev else 0.0
            if decay > 0:
                dt = min(max(1.1 * math.log(norm / eq_tol) / decay, 0.5 / rate), 4.0 * dt)
    return rho, StageResult(name, t, norm)


def run_sequential(stages, rho0, eq_tol=DEFAULT_EQ_TOL, budget=None):
    """Run each stage to equilibrium in order; returns (final state, per-stage results)."""
    rho = rho0
    results = []
    for i, st in enumerate(stages):
        if isinstance(st, Stage):
            name, L = st.name, st.liouvillian
        else:
            name, L = f"stage_{i}", st
        if L.register != rho.register:
            raise ValueError(f"stage {name!r} is defined on a different register")
        rho, res = run_stage(L, rho, eq_tol, budget, name)
        results.append(res)
    return rho, results


@dataclass
class TransferRun:
    n: int
    phi_in: np.ndarray
    stages: list
    eq_tol: float
    stage_times: list = field(default_factory=list)
    fidelity: float | None = None
    output_site: str = ""
    rho_final: DensityMatrix | None = field(default=None, repr=False)
    registry_populations: dict = field(default_factory=dict)

    def to_json_dict(self):
        return {
            "n": self.n,
            "phi_in": [[float(v.real), float(v.imag)] for v in self.phi_in],
            "stages": list(self.stages),
            "eq_tol": self.eq_tol,
            "stage_times": [float(t) for t in self.stage_times],
            "fidelity": self.fidelity,
            "registry_populations": {k: float(v) for k, v in sorted(self.registry_populations.items())},
        }


def transfer_fidelity(run):
    """<phi_in| rho_out |phi_in> on the output site of a completed run."""
    if run.rho_final is None:
        raise ValueError("run has not been executed")
    out = partial_trace(run.rho_final, [run.output_site])
    return fidelity_with_pure(out, np.asarray(run.phi_in) / np.linalg.norm(run.phi_in))


def _registry_populations(rho, sites):
    red = partial_trace(rho, sites)
    pops = np.clip(red.diagonal(), 0.0, None)
    w = len(sites)
    return {format(i, f"0{w}b"): float(p) for i, p in enumerate(pops)}


def transfer3_initial_state(phi_in, registry=(0, 0)):
    from .gadgets import transfer3_register

    psi = prepare_cluster(phi_in, 3)
    for b in registry:
        psi = np.kron(psi, np.eye(2)[b])
    return DensityMatrix.from_pure(transfer3_register(), psi)


def run_transfer3(phi_in, omega=1.0, eq_tol=DEFAULT_EQ_TOL, order="AB", recovery=None):
    """Three-site transfer: stage A records outcomes on q4, q5; stage B corrects q3."""
    phi_in = _check_qubit(phi_in)
    LA, LB = build_transfer_3qubit(omega, recovery)
    named = {"A": Stage("A", LA), "B": Stage("B", LB)}
    stages = [named[c] for c in order]
    rho0 = transfer3_initial_state(phi_in)
    rho, res = run_sequential(stages, rho0, eq_tol)
    run = TransferRun(3, phi_in, [s.name for s in stages], eq_tol, [r.time for r in res], output_site="q3")
    run.rho_final = rho
    run.fidelity = transfer_fidelity(run)
    run.registry_populations = _registry_populations(rho, ["q4", "q5"])
    return run


def transfer_n_initial_state(phi_in, n):
    from .gadgets import transfer_register

    reg = transfer_register(n)
    psi = prepare_cluster(phi_in, n)
    zeros = np.zeros(2 ** (reg.n - n), dtype=complex)
    zeros[0] = 1.0
    return DensityMatrix.from_pure(reg, np.kron(psi, zeros))


def bus_parity_mismatch(rho, n):
    """Probability that the final bus bits differ from the parities of the x-outcomes.

    The measured logical sites keep their outcome in the x basis, so rotating
    them by a Hadamard exposes the sampled branch.
    """
    sites = [f"l{j}" for j in range(1, n)] + [f"b1_{n - 1}", f"b2_{n - 1}"]
    red = partial_trace(rho, sites)
    H = HADAMARD
    for _ in range(n - 2):
        H = np.kron(H, HADAMARD)
    H = np.kron(H, np.eye(4))
    pops = np.real(np.diag(H @ red.matrix @ H.conj().T))
    bad = 0.0
    for idx, p in enumerate(pops):
        bits = [(idx >> (len(sites) - 1 - q)) & 1 for q in range(len(sites))]
        outcomes, (b1, b2) = bits[: n - 1], bits[n - 1 :]
        if byproduct_parities(outcomes) != (b1, b2):
            bad += p
    return float(bad)


def run_transfer_n(phi_in, n, omega=1.0, eq_tol=DEFAULT_EQ_TOL, recovery=None, stop_before_recovery=False):
    """Odd-n bus protocol executed stage by stage with the matrix-free integrator."""
    phi_in = _check_qubit(phi_in)
    stages = build_transfer_nqubit(n, omega, recovery)
    size = stages[0].liouvillian.register.n
    if size > MAX_TRANSFER_QUBITS:
        raise ValueError(f"{size}-qubit register is too large for density-matrix simulation")
    if stop_before_recovery:
        stages = stages[:-1]
    rho0 = transfer_n_initial_state(phi_in, n)
    rho, res = run_sequential(stages, rho0, eq_tol)
    run = TransferRun(n, phi_in, [s.name for s in stages], eq_tol, [r.time for r in res], output_site=f"l{n}")
    run.rho_final = rho
    run.fidelity = transfer_fidelity(run)
    run.registry_populations = _registry_populations(rho, [f"b1_{n - 1}", f"b2_{n - 1}"])
    return run


# ---------------------------------------------------------------------------
# timer-triggered composite


@dataclass(frozen=True)
class TriggeredComposite:
    liouvillian: Liouvillian
    protocol: QubitRegister
    timer_registers: tuple


def build_timer_triggered(target_stages, timer_cfgs, timer_prefix="T"):
    """One time-independent generator: each stage switched on by the last qubit of its own timer."""
    if len(target_stages) != len(timer_cfgs):
        raise ValueError("need one timer per stage")
    if not target_stages:
        raise ValueError("no stages given")
    protocol = target_stages[0].register
    timers = []
    for i, cfg in enumerate(timer_cfgs, start=1):
        timers.append(build_timer(cfg, prefix=f"{timer_prefix}{i}_"))
    full = protocol
    for tl in timers:
        full = full + tl.register
    if full.dim**2 > (1 << 20):
        raise ValueError(f"composite register of {full.n} qubits is too large")
    ops = []
    for L, tl in zip(target_stages, timers):
        if L.register != protocol:
            raise ValueError("all stages must share the protocol register")
        last = tl.register.labels[-1]
        for op in L.operators:
            ops.append(build_conditional(lift(op, full), last, 0))
        ops.extend(lift(op, full) for op in tl.operators)
    return TriggeredComposite(Liouvillian(full, tuple(ops)), protocol, tuple(tl.register for tl in timers))


def triggered_initial_state(comp, rho0, timer_cfgs, timer_prefix="T"):
    m = rho0.matrix
    for i, cfg in enumerate(timer_cfgs, start=1):
        m = np.kron(m, timer_initial_state(cfg.N, prefix=f"{timer_prefix}{i}_").matrix)
    return DensityMatrix(comp.liouvillian.register, m, tol=1e-8)


def run_timer_triggered(target_stages, timer_cfgs, rho0, t, tol=None):
    """Evolve the composite once to time t and return the protocol-register state."""
    comp = build_timer_triggered(target_stages, timer_cfgs)
    full0 = triggered_initial_state(comp, rho0, timer_cfgs)
    rho = evolve(comp.liouvillian, full0, t, tol=tol)
    return partial_trace(rho, list(comp.protocol.labels))


def damping_stage(register, site, omega):
    return Liouvillian(register, (LindbladOperator.local(register, [site], LOWER, "damp", omega),))


def flip_stage(register, site, omega):
    """Drives |+> to |->."""
    return Liouvillian(
        register, (LindbladOperator.local(register, [site], np.outer(MINUS, PLUS.conj()), "flip", omega),)
    )

