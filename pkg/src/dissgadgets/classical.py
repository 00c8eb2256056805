"""Classical reduction of the initializer and timer gadgets.

Both gadgets act only on the computational-basis diagonal, and the initializer
is symmetric under permutations of its auxiliary qubits. The initializer
therefore reduces to a continuous-time Markov chain on states (a, k): center
value ``a`` and ``k`` excited auxiliaries. States are indexed ``a * (M + 1) + k``
and generators act on column probability vectors (``dp/dt = Q p``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln

from . import kernels
from .gadgets import InitializerConfig

UNIFORMIZATION_TOL = 1e-12


@dataclass(frozen=True)
class SymmetrizedState:
    """Probabilities ``p[a, k]`` of center value a with k of M auxiliaries excited."""

    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 2 or p.shape[0] != 2:
            raise ValueError("symmetrized state must have shape (2, M + 1)")
        if np.any(p < -1e-12):
            raise ValueError("negative probability in symmetrized state")
        if abs(p.sum() - 1.0) > 1e-8:
            raise ValueError(f"symmetrized state sums to {p.sum()}")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def M(self):
        return self.p.shape[1] - 1

    def vector(self):
        return self.p.ravel().copy()

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=float)
        return cls(v.reshape(2, -1))


@dataclass(frozen=True, eq=False)
class ClassicalGenerator:
    """Sparse CTMC generator; column j holds the rates out of state j."""

    Q: sp.csr_matrix

    def __post_init__(self):
        q = sp.csr_matrix(self.Q, dtype=float)
        if q.shape[0] != q.shape[1]:
            raise ValueError("generator must be square")
        off = q - sp.diags(q.diagonal())
        if off.nnz and off.data.min() < 0:
            raise ValueError("negative off-diagonal rate")
        colsum = np.asarray(q.sum(axis=0)).ravel()
        scale = max(1.0, float(np.max(np.abs(q.diagonal()))) if q.nnz else 1.0)
        if np.max(np.abs(colsum), initial=0.0) > 1e-12 * scale:
            raise ValueError("generator columns must sum to zero")
        object.__setattr__(self, "Q", q)

    @property
    def size(self):
        return self.Q.shape[0]

    def max_exit_rate(self):
        return float(np.max(-self.Q.diagonal(), initial=0.0))


def _popcount(idx):
    idx = np.asarray(idx, dtype=np.int64)
    c = np.zeros_like(idx)
    while np.any(idx):
        c += idx & 1
        idx = idx >> 1
    return c


def symmetrize(rho, M=None):
    """Project an initializer-register density matrix onto the (a, k) populations.

    The center must be the first register site, followed by the M auxiliaries.
    """
    n = rho.register.n
    if M is None:
        M = n - 1
    if n != M + 1:
        raise ValueError(f"register has {n} sites, expected M + 1 = {M + 1}")
    diag = rho.diagonal()
    idx = np.arange(rho.register.dim)
    a = idx >> M
    k = _popcount(idx & ((1 << M) - 1))
    p = np.zeros((2, M + 1))
    np.add.at(p, (a, k), diag)
    return SymmetrizedState(np.clip(p, 0.0, None) / max(p.sum(), 1e-300))


def initializer_generator(M, omega, Gamma):
    """(1,k) -> (0,k) at k*Gamma, (a,k) -> (a,k-1) at k*omega."""
    InitializerConfig(M, omega, Gamma)
    size = 2 * (M + 1)
    rows, cols, vals = [], [], []
    for a in (0, 1):
        for k in range(1, M + 1):
            src = a * (M + 1) + k
            rows.append(a * (M + 1) + k - 1)
            cols.append(src)
            vals.append(k * omega)
            out = k * omega
            if a == 1:
                rows.append(k)
                cols.append(src)
                vals.append(k * Gamma)
                out += k * Gamma
            rows.append(src)
            cols.append(src)
            vals.append(-out)
    Q = sp.csr_matrix((vals, (rows, cols)), shape=(size, size))
    return ClassicalGenerator(Q)


def evolve_classical(gen, p0, t, tol=UNIFORMIZATION_TOL):
    """exp(t Q) p0 by uniformization with total-variation truncation error below ``tol``."""
    if t < 0:
        raise ValueError("negative evolution time")
    p0 = np.asarray(p0.vector() if isinstance(p0, SymmetrizedState) else p0, dtype=float)
    if p0.shape != (gen.size,):
        raise ValueError("distribution does not match generator size")
    lam = gen.max_exit_rate()
    if lam == 0.0 or t == 0.0:
        return p0.copy()
    P = sp.identity(gen.size, format="csr") + gen.Q / lam
    out = kernels.uniformize(sp.csr_matrix(P), lam, p0, t, tol)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("uniformization produced non-finite values")
    return out


def overlap_formula(k, t, omega, Gamma):
    """Probability that (1, k) is found in (1, 0) after time t: (xi (1 - e^{-(omega+Gamma) t}))^k."""
    if k < 0 or np.any(np.asarray(t) < 0):
        raise ValueError("k and t must be nonnegative")
    xi = omega / (omega + Gamma)
    return (xi * -np.expm1(-(omega + Gamma) * np.asarray(t, dtype=float))) ** k


def product_excited_distribution(K, t, omega, Gamma):
    """Exact (a, j) populations at time t from (1, K).

    Auxiliaries decay independently; the center survives in |1> only if no
    conditional flip fired while its auxiliaries were excited.
    """
    j = np.arange(K + 1)
    s = math.exp(-(omega + Gamma) * t)
    xi = omega / (omega + Gamma)
    logc = gammaln(K + 1) - gammaln(j + 1) - gammaln(K - j + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        one = np.exp(logc + j * math.log(s) + (K - j) * np.log(xi * -math.expm1(-(omega + Gamma) * t)))
        surv = math.exp(-omega * t)
        aux = np.exp(logc + j * math.log(surv) + (K - j) * np.log(-math.expm1(-omega * t)))
    if t == 0:
        one = (j == K).astype(float)
        aux = one.copy()
    p = np.zeros((2, K + 1))
    p[1] = one
    p[0] = np.clip(aux - one, 0.0, None)
    return p


def recurrence_f(k, m_max):
    """Exact integer table ``f[m][j]`` of ((L/(-Gamma))^m)(phi_k) in the phi_j basis, omega = Gamma.

    Uses ``f_{m+1}(j) = -(j+1) f_m(j+1) + 2 j f_m(j)``. Python integers are
    exact, so no precision is lost at any size; use :func:`f_table_as_float`
    to get a float array (raises OverflowError when entries leave float range).
    """
    if k < 0 or m_max < 0:
        raise ValueError("k and m must be nonnegative")
    row = [1 if j == k else 0 for j in range(k + 1)]
    table = [row]
    for _ in range(m_max):
        prev = table[-1]
        nxt = [-(j + 1) * (prev[j + 1] if j < k else 0) + 2 * j * prev[j] for j in range(k + 1)]
        table.append(nxt)
    return table


def f_closed_form(k, m, j):
    """Binomial-sum value of f^k_m(j): 2^(j-k) C(k,j) sum_l C(k-j,l-j) (-1)^(l-j) (2l)^m."""
    total = sum(math.comb(k - j, l - j) * (-1) ** (l - j) * (2 * l) ** m for l in range(j, k + 1))
    return Fraction(math.comb(k, j) * total, 2 ** (k - j))


def f_table_as_float(table):
    out = np.empty((len(table), len(table[0])))
    for m, row in enumerate(table):
        for j, v in enumerate(row):
            out[m, j] = float(v)
    return out


def overlap_series(k, gamma_t, tail_tol=1e-12):
    """Sum_m (-Gamma t)^m f^k_m(0) / m! evaluated in exact rational arithmetic.

    Terms are added until the geometric bound on the remaining tail, using
    |f^k_m(0)| <= (2k)^m, falls below ``tail_tol``.
    """
    x = Fraction(gamma_t)
    if k == 0:
        return 1.0
    r = 2 * k * float(gamma_t)
    m = 0
    total = Fraction(0)
    row = [1 if j == k else 0 for j in range(k + 1)]
    term_scale = Fraction(1)
    while True:
        total += term_scale * row[0]
        m += 1
        term_scale = term_scale * (-x) / m
        row = [-(j + 1) * (row[j + 1] if j < k else 0) + 2 * j * row[j] for j in range(k + 1)]
        if m > 2 * r:
            bound = r**m / math.factorial(m) / (1.0 - r / (m + 1))
            if bound < tail_tol:
                break
    return float(total)


def _eta_stochastic(t, omega, Gamma):
    # 4-state chain of one (center, auxiliary) pair; order (c, a) = 00, 01, 10, 11
    Q = np.zeros((4, 4))
    Q[0, 1] += omega  # 01 -> 00
    Q[2, 3] += omega  # 11 -> 10
    Q[1, 3] += Gamma  # 11 -> 01
    Q -= np.diag(Q.sum(axis=0))
    from scipy.linalg import expm

    T = expm(t * Q)
    xi = omega / (omega + Gamma)
    Tinf = np.zeros((4, 4))
    Tinf[0, [0, 1]] = 1.0
    Tinf[2, 2] = 1.0
    Tinf[2, 3] = xi
    Tinf[0, 3] = 1.0 - xi
    return T, Tinf


def eta_exhaustive(t, omega, Gamma):
    """sup over distributions of ||(e^{t Lambda} - T_inf) p||_1 for the two-qubit pair.

    The objective is convex, so the supremum sits at a vertex of the simplex.
    """
    T, Tinf = _eta_stochastic(t, omega, Gamma)
    return float(np.max(np.abs(T - Tinf).sum(axis=0)))


def eta_bound(t, M, omega, Gamma):
    """(two-qubit expression e^{-t omega}(2 + e^{-t Gamma} xi), global bound 3 M e^{-t omega})."""
    if t < 0:
        raise ValueError("negative time")
    xi = omega / (omega + Gamma)
    two = math.exp(-t * omega) * (2.0 + math.exp(-t * Gamma) * xi)
    return two, 3.0 * M * math.exp(-t * omega)


def certificate_mu(M, xi, delta, c):
    """Exponent mu with max_k summand = e^{-mu M}.

    Summands are (1-delta)^(S-k) xi^k for k <= S and xi^k for k > S, with
    S = floor(c M) auxiliaries guaranteed above delta.
    """
    if not (0 < delta <= 1) or not (0 < c <= 1):
        raise ValueError("delta and c must lie in (0, 1]")
    S = int(math.floor(c * M + 1e-12))
    logs = []
    for k in range(M + 1):
        if k <= S:
            if delta == 1.0 and k < S:
                continue
            lg = k * math.log(xi) + ((S - k) * math.log1p(-delta) if S > k else 0.0)
        else:
            lg = k * math.log(xi)
        logs.append(lg)
    return -max(logs) / M


def binomial_mu(M, xi, delta, c):
    """Exponent of the exact worst-case survival (1 - delta + delta xi)^(floor(cM)), per auxiliary."""
    if not (0 < delta <= 1) or not (0 < c <= 1):
        raise ValueError("delta and c must lie in (0, 1]")
    S = int(math.floor(c * M + 1e-12))
    return -S * math.log1p(-delta * (1.0 - xi)) / M


def initializer_certificate(cfg, delta, c, t):
    """Composite bound M (3 e^{-t omega} + e^{-mu M}) and the exponent mu."""
    mu = certificate_mu(cfg.M, cfg.xi, delta, c)
    bound = cfg.M * (3.0 * math.exp(-t * cfg.omega) + math.exp(-mu * cfg.M))
    return bound, mu


def worst_case_product_input(M, delta, c):
    """Center in |1>, floor(cM) auxiliaries excited with probability delta, the rest in |0>.

    Returns the symmetrized distribution (binomial in the excitation count).
    """
    S = int(math.floor(c * M + 1e-12))
    k = np.arange(S + 1)
    logc = gammaln(S + 1) - gammaln(k + 1) - gammaln(S - k + 1)
    with np.errstate(divide="ignore"):
        w = np.exp(logc + k * np.log(delta) + (S - k) * np.log1p(-delta)) if delta < 1 else (k == S).astype(float)
    p = np.zeros((2, M + 1))
    p[1, : S + 1] = w
    return SymmetrizedState(p / p.sum())


def center_excited(p, M):
    """<1_c| rho_c |1_c> from a symmetrized probability vector."""
    return float(np.sum(np.asarray(p)[M + 1 :]))


def initializer_limit(p0, M, omega, Gamma):
    """Long-time limit T_inf of a symmetrized distribution."""
    p0 = np.asarray(p0, dtype=float).reshape(2, M + 1)
    xi = omega / (omega + Gamma)
    stay = float(np.sum(p0[1] * xi ** np.arange(M + 1)))
    out = np.zeros((2, M + 1))
    out[1, 0] = stay
    out[0, 0] = 1.0 - stay
    return out.ravel()


def equilibration_time(M, omega, Gamma, p0, threshold=1e-6, dt=None):
    """First time the total-variation distance to the limit drops to ``threshold``."""
    gen = initializer_generator(M, omega, Gamma)
    p0 = np.asarray(p0.vector() if isinstance(p0, SymmetrizedState) else p0, dtype=float)
    limit = initializer_limit(p0, M, omega, Gamma)
    dt = 0.25 / omega if dt is None else dt

    def tv(p):
        return 0.5 * float(np.abs(p - limit).sum())

    t, p = 0.0, p0
    while tv(p) > threshold:
        p_prev, t_prev = p, t
        p = evolve_classical(gen, p, dt)
        t += dt
        if t > 1e4 / omega:
            raise RuntimeError("initializer did not equilibrate")
    if t == 0.0:
        return 0.0
    lo, hi = t_prev, t
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if tv(evolve_classical(gen, p_prev, mid - t_prev)) > threshold:
            lo = mid
        else:
            hi = mid
    return hi


# ---------------------------------------------------------------------------
# timer


def timer_occupation(N, t, gamma):
    """<0_N| tr_{N-1} e^{t L_cut}(phi_0) |0_N> = 1 - e^{-t gamma} sum_{k<=N-2} (t gamma)^k / k!."""
    if N < 2:
        raise ValueError("timer needs N >= 2")
    x = np.asarray(t, dtype=float) * gamma
    if np.any(x < 0):
        raise ValueError("negative time")
    out = kernels.poisson_upper(np.full(x.shape, N - 1, dtype=np.int64), x)
    return float(out) if out.ndim == 0 else out


def timer_distribution(N, t, gamma):
    """Weights of phi_0 .. phi_{N-2} (truncated Poisson) and the absorbing all-zero mass.

    phi_k has its first k+1 sites in |0> and the rest in |1>.
    """
    if N < 2:
        raise ValueError("timer needs N >= 2")
    x = float(t) * gamma
    k = np.arange(N - 1)
    if x == 0.0:
        w = (k == 0).astype(float)
    else:
        w = np.exp(k * math.log(x) - x - gammaln(k + 1))
    return w, timer_occupation(N, t, gamma)


def timer_chain_generator(N, gamma):
    """Full 2^N-state classical generator of the timer (bit j+1 decays while bit j is 0)."""
    size = 2**N
    rows, cols, vals = [], [], []
    diag = np.zeros(size)
    for s in range(size):
        for j in range(N - 1):
            bj = (s >> (N - 1 - j)) & 1
            bn = (s >> (N - 2 - j)) & 1
            if bj == 0 and bn == 1:
                dst = s & ~(1 << (N - 2 - j))
                rows.append(dst)
                cols.append(s)
                vals.append(gamma)
                diag[s] -= gamma
    Q = sp.csr_matrix((vals, (rows, cols)), shape=(size, size)) + sp.diags(diag)
    return ClassicalGenerator(Q)


def timer_trigger_by_config(N, t, gamma, tol=1e-14):
    """Probability that the last bit reads 0 at time t, for every initial configuration.

    Computed with one adjoint uniformization pass: v(t) = e^{t Q^T} 1_{last bit = 0}.
    """
    gen = timer_chain_generator(N, gamma)
    lam = gen.max_exit_rate()
    f = np.array([1.0 - (s & 1) for s in range(2**N)])
    if lam == 0 or t == 0:
        return f
    P = sp.csr_matrix(sp.identity(gen.size) + gen.Q.T / lam)
    return kernels.uniformize(P, lam, f, t, tol)
