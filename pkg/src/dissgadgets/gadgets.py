"""Constructors for the initializer, timer, measurement and state-transfer generators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .lindblad import (
    IDENTITY2,
    KET0,
    KET1,
    MINUS,
    PLUS,
    SIGMA_X,
    SIGMA_Z,
    DensityMatrix,
    Liouvillian,
    LindbladOperator,
    QubitRegister,
    embed_local,
    ketbra,
    labels_of,
    projector,
)

LOWER = ketbra(KET0, KET1)  # |0><1|
P0 = projector(KET0)
P1 = projector(KET1)
PAULIS = {"i": IDENTITY2, "x": SIGMA_X, "z": SIGMA_Z, "zx": SIGMA_Z @ SIGMA_X, "xz": SIGMA_X @ SIGMA_Z}

# Registry pattern (s_first, s_second) -> Pauli undoing the cluster byproduct X^s_second Z^s_first.
DEFAULT_RECOVERY = {"01": "x", "10": "z", "11": "zx"}


@dataclass(frozen=True)
class InitializerConfig:
    M: int
    omega: float
    Gamma: float

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError("initializer needs M >= 1 auxiliary qubits")
        if not (self.omega > 0 and self.Gamma > 0):
            raise ValueError("initializer rates must be strictly positive")

    @property
    def xi(self):
        return self.omega / (self.omega + self.Gamma)


@dataclass(frozen=True)
class TimerConfig:
    N: int
    gamma: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError("timer needs N >= 2 qubits")
        if not self.gamma > 0:
            raise ValueError("timer rate must be strictly positive")


@dataclass(frozen=True)
class Stage:
    name: str
    liouvillian: Liouvillian


def initializer_register(M, center="c", aux_prefix="a"):
    return QubitRegister((center,) + labels_of(aux_prefix, M))


def build_initializer(cfg, center="c", aux_prefix="a"):
    """Star gadget: damping on every auxiliary qubit plus damping of the center conditioned on it."""
    reg = initializer_register(cfg.M, center, aux_prefix)
    ops = []
    for k, aux in enumerate(reg.labels[1:], start=1):
        ops.append(LindbladOperator.local(reg, [aux], LOWER, f"ad_{k}", cfg.omega))
        ops.append(LindbladOperator.local(reg, [center, aux], np.kron(LOWER, P1), f"cp_{k}", cfg.Gamma))
    return Liouvillian(reg, tuple(ops))


def build_timer(cfg, prefix="t"):
    """Chain whose site j+1 is damped at rate gamma while site j is in |0>."""
    reg = QubitRegister(labels_of(prefix, cfg.N))
    ops = [
        LindbladOperator.local(reg, [a, b], np.kron(P0, LOWER), f"cut_{j}", cfg.gamma)
        for j, (a, b) in enumerate(zip(reg.labels[:-1], reg.labels[1:]), start=1)
    ]
    return Liouvillian(reg, tuple(ops))


def timer_initial_state(N, prefix="t"):
    """|0> on the first timer qubit, |1> on the rest."""
    if N < 2:
        raise ValueError("timer needs N >= 2 qubits")
    reg = QubitRegister(labels_of(prefix, N))
    return DensityMatrix.basis(reg, [0] + [1] * (N - 1))


def build_measurement(register, basis, subsystem, registry, rate=1.0):
    """Dissipative projective measurement recorded on a computational-basis registry.

    Jumps are ``sqrt(rate) |xi_k><xi_k| (x) |k><r|`` for every outcome ``k`` and
    registry state ``r``, so the generator is (measure-and-record) minus identity.
    """
    subsystem = tuple(subsystem)
    registry = tuple(registry)
    basis = [np.asarray(v, dtype=complex) for v in basis]
    ds = 2 ** len(subsystem)
    dr = 2 ** len(registry)
    if any(v.shape != (ds,) for v in basis):
        raise ValueError("basis vectors do not match the subsystem dimension")
    gram = np.array([[np.vdot(u, v) for v in basis] for u in basis])
    if len(basis) != ds or not np.allclose(gram, np.eye(ds), atol=1e-10):
        raise ValueError("measurement basis must be orthonormal and complete")
    if dr < len(basis):
        raise ValueError("registry too small to hold every outcome")
    ops = []
    for k, v in enumerate(basis):
        for r in range(dr):
            rec = np.zeros((dr, dr), dtype=complex)
            rec[k, r] = 1.0
            ops.append(
                LindbladOperator.local(register, subsystem + registry, np.kron(projector(v), rec), f"meas_{k}<-{r}", rate)
            )
    return Liouvillian(register, tuple(ops))


def build_conditional(target, trigger_site, trigger_state):
    """``target`` tensored with the projector onto ``trigger_state`` at ``trigger_site``."""
    if trigger_site in target.support:
        raise ValueError(f"trigger site {trigger_site!r} overlaps the target support")
    if trigger_state not in (0, 1):
        raise ValueError("trigger_state must be 0 or 1")
    proj = embed_local(target.register, [trigger_site], P0 if trigger_state == 0 else P1)
    return LindbladOperator(
        target.register,
        sp.csr_matrix(target.matrix @ proj),
        f"{target.tag}|{trigger_site}={trigger_state}",
        target.support | {trigger_site},
    )


def _recovery_ops(reg, output, cond_sites, omega, recovery):
    ops = []
    for pattern, pauli in sorted(recovery.items()):
        bra = np.zeros(4, dtype=complex)
        bra[int(pattern, 2)] = 1.0
        reset = np.outer(np.eye(4)[0], bra)  # |00><pattern|
        ops.append(
            LindbladOperator.local(reg, [output, *cond_sites], np.kron(PAULIS[pauli], reset), f"B_{pattern}", omega)
        )
    return ops


def transfer3_register():
    return QubitRegister(labels_of("q", 5))


def build_transfer_3qubit(omega, recovery=None):
    """Stage A records x-measurements of q1, q2 on q4, q5; stage B undoes the byproduct on q3.

    ``recovery`` maps registry patterns to the Pauli applied to q3; the default
    undoes the byproduct X^s2 Z^s1 of a controlled-Z chain.
    """
    if not omega > 0:
        raise ValueError("rate must be positive")
    recovery = DEFAULT_RECOVERY if recovery is None else recovery
    reg = transfer3_register()
    a_ops = []
    for j in (1, 2):
        q, r = f"q{j}", f"q{j + 3}"
        a_ops.append(LindbladOperator.local(reg, [q, r], np.kron(projector(PLUS), LOWER), f"A1_{j}", omega))
        a_ops.append(LindbladOperator.local(reg, [q, r], np.kron(projector(MINUS), LOWER.T), f"A2_{j}", omega))
    b_ops = _recovery_ops(reg, "q3", ["q4", "q5"], omega, recovery)
    return Liouvillian(reg, tuple(a_ops)), Liouvillian(reg, tuple(b_ops))


def transfer_register(n):
    return QubitRegister(
        labels_of("l", n) + labels_of("m", n) + labels_of("b1_", n - 1) + labels_of("b2_", n - 1)
    )


def bus_row(j):
    """Bus line tracking outcome j: odd steps feed the Z parity, even steps the X parity."""
    return "b1_" if j % 2 == 1 else "b2_"


def build_transfer_nqubit(n, omega, recovery=None):
    """Ordered stages for the odd-n chain: per step measure, write to bus, merge bus parity; then recover.

    The merge moves the parity of bus site j-1 into site j on both lines
    (10 -> 01, 11 -> 00), so after step n-1 the last site of each line holds
    the accumulated Z and X byproduct parities.
    """
    if n < 3 or n % 2 == 0:
        raise ValueError("state transfer needs an odd chain length n >= 3")
    recovery = DEFAULT_RECOVERY if recovery is None else recovery
    reg = transfer_register(n)
    e = np.eye(4)
    merge = [np.outer(e[1], e[2]), np.outer(e[0], e[3])]  # |01><10|, |00><11|
    stages = []
    for j in range(1, n):
        l, m = f"l{j}", f"m{j}"
        meas = (
            LindbladOperator.local(reg, [l, m], np.kron(projector(PLUS), LOWER), f"m1_{j}", omega),
            LindbladOperator.local(reg, [l, m], np.kron(projector(MINUS), LOWER.T), f"m3_{j}", omega),
        )
        stages.append(Stage(f"measure_{j}", Liouvillian(reg, meas)))
        bus = f"{bus_row(j)}{j}"
        upd = (LindbladOperator.local(reg, [m, bus], np.kron(LOWER, SIGMA_X), f"mt_{j}", omega),)
        stages.append(Stage(f"update_{j}", Liouvillian(reg, upd)))
        if j >= 2:
            shift = tuple(
                LindbladOperator.local(reg, [f"{row}{j - 1}", f"{row}{j}"], op, f"{row}{j}_{i}", omega)
                for row in ("b1_", "b2_")
                for i, op in enumerate(merge, start=1)
            )
            stages.append(Stage(f"shift_{j}", Liouvillian(reg, shift)))
    rec = _recovery_ops(reg, f"l{n}", [f"b1_{n - 1}", f"b2_{n - 1}"], omega, recovery)
    stages.append(Stage("recovery", Liouvillian(reg, tuple(rec))))
    return stages


def build_by_name(name, **params):
    """Builder lookup used by config files and the CLI."""
    if name == "initializer":
        return build_initializer(InitializerConfig(int(params["M"]), float(params["omega"]), float(params["Gamma"])))
    if name == "timer":
        return build_timer(TimerConfig(int(params["N"]), float(params["gamma"])))
    if name == "transfer3":
        return build_transfer_3qubit(float(params.get("omega", 1.0)))
    if name == "transfer":
        return build_transfer_nqubit(int(params["n"]), float(params.get("omega", 1.0)))
    raise KeyError(f"unknown gadget {name!r}")
