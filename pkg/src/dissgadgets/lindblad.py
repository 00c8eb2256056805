"""Density matrices and purely dissipative Lindblad generators on small qubit registers.

Qubit ordering follows the register labels: the first label is the most
significant tensor factor. Superoperators act on row-major vectorized
matrices, ``vec(A rho B) = kron(A, B.T) @ vec(rho)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

KET0 = np.array([1.0, 0.0], dtype=complex)
KET1 = np.array([0.0, 1.0], dtype=complex)
PLUS = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
MINUS = np.array([1.0, -1.0], dtype=complex) / math.sqrt(2.0)
IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# Dense superoperators are only built when dim**2 stays below this.
DENSE_SUPEROP_MAX = 2**12
NULLSPACE_THRESHOLD = 1e-9
# Above the dense cap, generators whose joint support has at most this many
# sites are integrated on the support and applied as a local channel.
LOCAL_SUPPORT_MAX = 5


def ketbra(a, b):
    return np.outer(a, np.conj(b))


def projector(v):
    return ketbra(v, v)


def default_tol(dim):
    return 1e-10 if dim <= 256 else 1e-8


@dataclass(frozen=True)
class QubitRegister:
    labels: tuple

    def __post_init__(self):
        labels = tuple(self.labels)
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate register labels: {labels}")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return len(self.labels)

    @property
    def dim(self):
        return 2**self.n

    def index(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"label {label!r} not in register {self.labels}") from None

    def __contains__(self, label):
        return label in self.labels

    def __add__(self, other):
        return QubitRegister(self.labels + tuple(other.labels))


def _check_same_register(a, b):
    if a != b:
        raise ValueError(f"register mismatch: {a.labels} vs {b.labels}")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    register: QubitRegister
    matrix: np.ndarray
    tol: float | None = None
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        d = self.register.dim
        if m.shape != (d, d):
            raise ValueError(f"matrix shape {m.shape} does not match register dimension {d}")
        tol = default_tol(d) if self.tol is None else self.tol
        if self.check:
            herm = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
            if herm > tol:
                raise ValueError(f"density matrix not Hermitian (deviation {herm:.3e})")
            tr = np.trace(m).real
            if abs(tr - 1.0) > tol:
                raise ValueError(f"density matrix trace {tr!r} differs from 1")
            lam = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
            if lam < -tol:
                raise ValueError(f"density matrix has negative eigenvalue {lam:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "tol", tol)

    @classmethod
    def from_pure(cls, register, psi):
        psi = np.asarray(psi, dtype=complex)
        nrm = np.linalg.norm(psi)
        if abs(nrm - 1.0) > 1e-10:
            raise ValueError(f"state vector norm {nrm} is not 1")
        return cls(register, np.outer(psi, psi.conj()))

    @classmethod
    def product(cls, register, factors):
        """Tensor product of single-qubit states given in register order.

        Each factor is a length-2 vector or a 2x2 density matrix.
        """
        if len(factors) != register.n:
            raise ValueError("need one factor per register site")
        m = np.ones((1, 1), dtype=complex)
        for f in factors:
            f = np.asarray(f, dtype=complex)
            if f.ndim == 1:
                f = np.outer(f, f.conj())
            m = np.kron(m, f)
        return cls(register, m)

    @classmethod
    def basis(cls, register, bits):
        """Computational basis state, ``bits`` given per site in register order."""
        idx = 0
        for b in bits:
            idx = 2 * idx + int(b)
        m = np.zeros((register.dim, register.dim), dtype=complex)
        m[idx, idx] = 1.0
        return cls(register, m)

    @property
    def trace(self):
        return float(np.trace(self.matrix).real)

    def purity(self):
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def diagonal(self):
        return np.real(np.diag(self.matrix)).copy()

    def to_json_dict(self):
        return {
            "type": "density_matrix",
            "labels": list(self.register.labels),
            "dense": [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix],
        }

    @classmethod
    def from_json_dict(cls, data):
        if data.get("type") != "density_matrix":
            raise ValueError("not a density_matrix record")
        arr = np.asarray(data["dense"], dtype=float)
        return cls(QubitRegister(tuple(data["labels"])), arr[..., 0] + 1j * arr[..., 1])


def embed_local(register, sites, local):
    """Sparse full-register operator acting as ``local`` on ``sites`` (in the given order)."""
    sites = tuple(sites)
    if len(set(sites)) != len(sites):
        raise ValueError(f"repeated sites {sites}")
    pos = [register.index(s) for s in sites]
    k = len(sites)
    n = register.n
    local = sp.coo_matrix(local, dtype=complex)
    if local.shape != (2**k, 2**k):
        raise ValueError(f"local operator shape {local.shape} does not match {k} sites")
    local.eliminate_zeros()
    rest = [q for q in range(n) if q not in pos]
    base = _spread(np.arange(2 ** len(rest)), rest, n)
    rows = base[None, :] | _spread(local.row, pos, n)[:, None]
    cols = base[None, :] | _spread(local.col, pos, n)[:, None]
    vals = np.broadcast_to(local.data[:, None], rows.shape)
    return sp.csr_matrix(
        (vals.ravel(), (rows.ravel(), cols.ravel())),
        shape=(register.dim, register.dim),
    )


def _spread(local_index, positions, n):
    # scatter the bits of local_index onto the given qubit positions of an n-qubit index
    local_index = np.asarray(local_index, dtype=np.int64)
    k = len(positions)
    out = np.zeros_like(local_index)
    for i, q in enumerate(positions):
        out |= ((local_index >> (k - 1 - i)) & 1) << (n - 1 - q)
    return out


def restrict(op, sites):
    """Local matrix of ``op`` on ``sites``, which must cover everything it acts on."""
    reg = op.register
    pos = [reg.index(s) for s in sites]
    idx = _spread(np.arange(2 ** len(pos)), pos, reg.n)
    local = op.matrix[idx][:, idx].toarray()
    if abs(embed_local(reg, sites, local) - op.matrix).max() > 1e-14 * max(1.0, abs(op.matrix).max()):
        raise ValueError(f"operator {op.tag!r} acts outside sites {tuple(sites)}")
    return local


def lift(op, register):
    """Re-embed a jump operator into a larger register containing all its sites."""
    return LindbladOperator(register, embed_local(register, op.register.labels, op.matrix), op.tag, op.support)


@dataclass(frozen=True, eq=False)
class LindbladOperator:
    """A jump operator with its rate folded in (the matrix includes sqrt(rate))."""

    register: QubitRegister
    matrix: sp.csr_matrix
    tag: str = ""
    support: frozenset = frozenset()

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=complex)
        if m.shape != (self.register.dim, self.register.dim):
            raise ValueError("operator shape does not match register")
        if m.nnz and not np.all(np.isfinite(m.data)):
            raise ValueError("operator has non-finite entries")
        object.__setattr__(self, "matrix", m)
        sup = frozenset(self.support)
        for s in sup:
            self.register.index(s)
        object.__setattr__(self, "support", sup)

    @classmethod
    def local(cls, register, sites, local, tag="", rate=1.0):
        if rate < 0:
            raise ValueError("rate must be nonnegative")
        full = embed_local(register, sites, math.sqrt(rate) * np.asarray(local, dtype=complex))
        return cls(register, full, tag, frozenset(sites))

    @property
    def rate(self):
        """Squared spectral norm, i.e. the folded-in rate for projector-like jumps."""
        if self.matrix.nnz == 0:
            return 0.0
        return float(sp.linalg.norm(self.matrix, 1) * sp.linalg.norm(self.matrix, np.inf))

    def to_json_dict(self):
        coo = self.matrix.tocoo()
        return {
            "type": "lindblad_operator",
            "labels": list(self.register.labels),
            "tag": self.tag,
            "support": sorted(self.support, key=self.register.index),
            "shape": list(coo.shape),
            "entries": [
                [int(r), int(c), [float(v.real), float(v.imag)]] for r, c, v in zip(coo.row, coo.col, coo.data)
            ],
        }

    @classmethod
    def from_json_dict(cls, data):
        if data.get("type") != "lindblad_operator":
            raise ValueError("not a lindblad_operator record")
        reg = QubitRegister(tuple(data["labels"]))
        ent = data["entries"]
        rows = [e[0] for e in ent]
        cols = [e[1] for e in ent]
        vals = [complex(e[2][0], e[2][1]) for e in ent]
        m = sp.csr_matrix((vals, (rows, cols)), shape=tuple(data["shape"]), dtype=complex)
        return cls(reg, m, data.get("tag", ""), frozenset(data.get("support", ())))


@dataclass(frozen=True, eq=False)
class Liouvillian:
    register: QubitRegister
    operators: tuple = ()

    def __post_init__(self):
        ops = tuple(self.operators)
        for op in ops:
            _check_same_register(self.register, op.register)
        object.__setattr__(self, "operators", ops)

    def __len__(self):
        return len(self.operators)

    def __add__(self, other):
        _check_same_register(self.register, other.register)
        return Liouvillian(self.register, self.operators + other.operators)

    @cached_property
    def _parts(self):
        jumps = [(op.matrix, op.matrix.conj().T.tocsr()) for op in self.operators]
        d = self.register.dim
        k = sp.csr_matrix((d, d), dtype=complex)
        for L, Lh in jumps:
            k = k + Lh @ L
        return jumps, sp.csr_matrix(k)

    def support(self):
        """Sites acted on by any operator, in register order."""
        sup = set()
        for op in self.operators:
            sup |= op.support
        return tuple(lab for lab in self.register.labels if lab in sup)

    def restricted(self, sites):
        """The same generator on the sub-register ``sites``."""
        sub = QubitRegister(tuple(sites))
        return Liouvillian(
            sub, tuple(LindbladOperator(sub, restrict(op, sites), op.tag, op.support) for op in self.operators)
        )

    def norm_bound(self):
        """Upper bound on the trace-norm-induced norm of the generator."""
        return 2.0 * sum(op.rate for op in self.operators)

    def min_rate(self):
        rates = [op.rate for op in self.operators if op.rate > 0]
        return min(rates) if rates else 0.0

    def apply(self, rho):
        """Generator action on a raw matrix."""
        jumps, k = self._parts
        out = -0.5 * (k @ rho + (k.conj().T @ rho.conj().T).conj().T)
        for L, Lh in jumps:
            # L rho L^dagger = (L (L rho)^dagger)^dagger
            left = L @ rho
            out += (L @ left.conj().T).conj().T
        return out

    @cached_property
    def superoperator_sparse(self):
        jumps, k = self._parts
        d = self.register.dim
        eye = sp.identity(d, dtype=complex, format="csr")
        s = -0.5 * (sp.kron(k, eye) + sp.kron(eye, k.T))
        for L, _ in jumps:
            s = s + sp.kron(L, L.conj())
        return sp.csr_matrix(s)

    def superoperator(self):
        """Dense superoperator; only for registers with dim**2 <= DENSE_SUPEROP_MAX."""
        d = self.register.dim
        if d * d > DENSE_SUPEROP_MAX:
            raise ValueError(f"dense superoperator of side {d * d} exceeds cap {DENSE_SUPEROP_MAX}")
        return self.superoperator_sparse.toarray()

    def trace_defect(self):
        s = self.superoperator_sparse
        d = self.register.dim
        tr = np.eye(d, dtype=complex).ravel()
        return float(np.max(np.abs(s.T @ tr))) if s.nnz else 0.0

    def to_json_dict(self):
        return {
            "type": "liouvillian",
            "labels": list(self.register.labels),
            "operators": [op.to_json_dict() for op in self.operators],
        }

    @classmethod
    def from_json_dict(cls, data):
        reg = QubitRegister(tuple(data["labels"]))
        return cls(reg, tuple(LindbladOperator.from_json_dict(o) for o in data["operators"]))


def apply_generator(L, rho, tol=None):
    """Sum_j L_j rho L_j^dagger - {L_j^dagger L_j, rho}/2 as a Hermitian matrix."""
    _check_same_register(L.register, rho.register)
    m = rho.matrix
    tol = rho.tol if tol is None else tol
    if np.max(np.abs(m - m.conj().T)) > tol:
        raise ValueError("input is not Hermitian")
    out = L.apply(m)
    return 0.5 * (out + out.conj().T)


def _hermitize(m):
    return 0.5 * (m + m.conj().T)


def _propagate(action, rho, t, nsteps, term_tol):
    h = t / nsteps
    for _ in range(nsteps):
        acc = rho.copy()
        term = rho
        k = 1
        while True:
            term = (h / k) * action(term)
            acc += term
            if np.linalg.norm(term) <= term_tol:
                break
            k += 1
            if k > 200:
                raise RuntimeError("Taylor series failed to converge within a substep")
        rho = acc
    return rho


def _action_for(L):
    d = L.register.dim
    if d * d <= DENSE_SUPEROP_MAX:
        s = L.superoperator_sparse
        return lambda m: (s @ m.ravel()).reshape(d, d)
    return L.apply


def evolve(L, rho0, t, tol=None, max_steps=1 << 20):
    """exp(t L)(rho0) by substepped Taylor propagation with step doubling.

    The step count is doubled until two consecutive results agree to ``tol``
    in trace distance. Large registers driven on a few sites only are
    propagated through the local channel on those sites.
    """
    _check_same_register(L.register, rho0.register)
    if t < 0:
        raise ValueError("negative evolution time")
    d = L.register.dim
    tol = default_tol(d) if tol is None else tol
    if t == 0 or len(L) == 0:
        return DensityMatrix(rho0.register, rho0.matrix.copy(), tol=rho0.tol, check=False)
    if d * d > DENSE_SUPEROP_MAX:
        sup = L.support()
        if len(sup) <= LOCAL_SUPPORT_MAX and len(sup) < L.register.n:
            E = local_propagator(L.restricted(sup), t, tol, max_steps)
            pos = [L.register.index(s) for s in sup]
            out = _hermitize(_apply_local_map(E, np.array(rho0.matrix), pos, L.register.n))
            return DensityMatrix(rho0.register, out, tol=10 * tol, check=False)
    action = _action_for(L)
    n = max(1, math.ceil(t * L.norm_bound() / 4.0))

    def run(steps):
        term_tol = 1e-2 * tol / (steps * math.sqrt(d))
        return _hermitize(_propagate(action, np.array(rho0.matrix), t, steps, term_tol))

    prev = run(n)
    while True:
        n *= 2
        if n > max_steps:
            raise RuntimeError(f"integrator did not converge within {max_steps} steps")
        cur = run(n)
        if _trace_norm(cur - prev) / 2.0 < tol:
            return DensityMatrix(rho0.register, cur, tol=10 * tol, check=False)
        prev = cur


def local_propagator(L, t, tol, max_steps=1 << 20):
    """Superoperator matrix of exp(t L) with the same step-doubling control as :func:`evolve`.

    Agreement is measured by ``dim**2 * ||E_n - E_2n||_F``, which bounds the
    diamond-norm change of the channel.
    """
    d = L.register.dim
    S = L.superoperator()
    n = max(1, math.ceil(t * L.norm_bound() / 4.0))

    def run(steps):
        term_tol = 1e-2 * tol / (steps * d * d)
        return _propagate(lambda m: S @ m, np.eye(d * d, dtype=complex), t, steps, term_tol)

    prev = run(n)
    while True:
        n *= 2
        if n > max_steps:
            raise RuntimeError(f"integrator did not converge within {max_steps} steps")
        cur = run(n)
        if d * d * np.linalg.norm(cur - prev) < tol:
            return cur
        prev = cur


def _apply_local_map(E, m, pos, n):
    # apply a superoperator on the sites ``pos`` (register order) to an n-qubit matrix
    k = len(pos)
    ds, dr = 2**k, 2 ** (n - k)
    rest = [q for q in range(n) if q not in pos]
    perm = pos + rest + [n + q for q in pos] + [n + q for q in rest]
    t = m.reshape((2,) * (2 * n)).transpose(perm).reshape(ds, dr, ds, dr)
    t = t.transpose(0, 2, 1, 3).reshape(ds * ds, dr * dr)
    t = (E @ t).reshape(ds, ds, dr, dr).transpose(0, 2, 1, 3).reshape((2,) * (2 * n))
    return t.transpose(np.argsort(perm)).reshape(2**n, 2**n)


def _trace_norm(m):
    return float(np.sum(np.abs(np.linalg.eigvalsh(_hermitize(m)))))


def steady_state(L, threshold=NULLSPACE_THRESHOLD, max_dim=64):
    """Density-matrix basis of the stationary space of ``L``.

    Each returned state is the long-time limit of some input state, so all of
    them are valid density matrices spanning the kernel of the generator.
    """
    if len(L) == 0:
        raise ValueError("steady_state needs a nonempty Liouvillian")
    d = L.register.dim
    s = L.superoperator()
    _, sv, vh = np.linalg.svd(s)
    right = vh[sv < threshold].conj().T
    _, svl, vhl = np.linalg.svd(s.conj().T)
    left = vhl[svl < threshold].conj().T
    kdim = right.shape[1]
    if kdim == 0 or left.shape[1] != kdim:
        raise RuntimeError("could not resolve the stationary space")
    if kdim > max_dim:
        raise ValueError(f"stationary space dimension {kdim} exceeds cap {max_dim}")
    # spectral projector onto the kernel along the range
    proj = right @ np.linalg.solve(left.conj().T @ right, left.conj().T)

    basis = []
    stacked = np.zeros((d * d, 0), dtype=complex)
    for cand in _spanning_states(d):
        img = _hermitize((proj @ cand.ravel()).reshape(d, d))
        img /= np.trace(img).real
        trial = np.column_stack([stacked, img.ravel()])
        if np.linalg.matrix_rank(trial, tol=1e-8) > stacked.shape[1]:
            stacked = trial
            basis.append(DensityMatrix(L.register, img, tol=1e-8))
            if len(basis) == kdim:
                break
    return basis


def _spanning_states(d):
    for i in range(d):
        m = np.zeros((d, d), dtype=complex)
        m[i, i] = 1.0
        yield m
    for i in range(d):
        for j in range(i + 1, d):
            for phase in (1.0, 1j):
                v = np.zeros(d, dtype=complex)
                v[i] = 1.0
                v[j] = phase
                yield np.outer(v, v.conj()) / 2.0


def trace_distance(rho, sigma):
    _check_same_register(rho.register, sigma.register)
    return min(1.0, 0.5 * _trace_norm(rho.matrix - sigma.matrix))


def partial_trace(rho, keep):
    keep = list(keep)
    if not keep:
        raise ValueError("keep set is empty")
    reg = rho.register
    pos = sorted(reg.index(k) for k in keep)
    n = reg.n
    rest = [q for q in range(n) if q not in pos]
    t = rho.matrix.reshape((2,) * (2 * n))
    t = t.transpose(pos + rest + [n + q for q in pos] + [n + q for q in rest])
    dk, dr = 2 ** len(pos), 2 ** len(rest)
    red = np.einsum("ijkj->ik", t.reshape(dk, dr, dk, dr))
    labels = tuple(reg.labels[q] for q in pos)
    return DensityMatrix(QubitRegister(labels), red, tol=rho.tol, check=False)


def fidelity_with_pure(rho, psi, tol=1e-10):
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (rho.register.dim,):
        raise ValueError("state vector dimension mismatch")
    if abs(np.linalg.norm(psi) - 1.0) > tol:
        raise ValueError("state vector is not normalized")
    f = float(np.real(np.vdot(psi, rho.matrix @ psi)))
    return min(1.0, max(0.0, f))


def expm_superoperator(L, t):
    """Reference exp(t S) via scipy's Pade scaling-and-squaring (small registers only)."""
    return sla.expm(t * L.superoperator())


def evolve_dense_reference(L, rho0, t):
    d = L.register.dim
    out = (expm_superoperator(L, t) @ rho0.matrix.ravel()).reshape(d, d)
    return DensityMatrix(L.register, _hermitize(out), tol=1e-8, check=False)


def labels_of(prefix, count, start=1):
    return tuple(f"{prefix}{i}" for i in range(start, start + count))
