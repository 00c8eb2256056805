"""Cutoff profiles, trigger-window tails and error budgets for the timer and initializer."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import log_ndtr

from .classical import timer_occupation, timer_trigger_by_config
from .special import normal_cdf, regularized_gamma_pq


# ---------------------------------------------------------------------------
# cutoff profile


def cutoff_time(N, x, gamma):
    """t_N(x) = (N + x sqrt(N)) / gamma, clipped at zero."""
    return max(N + x * math.sqrt(N), 0.0) / gamma


@dataclass(frozen=True)
class CutoffProfile:
    N: int
    gamma: float
    x: np.ndarray
    t: np.ndarray
    deviation: np.ndarray
    gaussian: np.ndarray
    remainder: np.ndarray
    sup_remainder: float
    window_constant: float  # sup_remainder * sqrt(N)

    def rows(self):
        for i in range(len(self.x)):
            yield (float(self.x[i]), float(self.t[i]), float(self.deviation[i]), float(self.gaussian[i]), float(self.remainder[i]))


def cutoff_profile(N, gamma, x_grid):
    """Deviation 1 - occupation at t_N(x) against the Gaussian profile 1 - Phi(x)."""
    if N < 2:
        raise ValueError("timer needs N >= 2")
    x = np.asarray(x_grid, dtype=float)
    t = np.array([cutoff_time(N, xi, gamma) for xi in x])
    occ = np.atleast_1d(timer_occupation(N, t, gamma))
    dev = np.clip(1.0 - occ, 0.0, 1.0)
    gauss = 1.0 - np.asarray(normal_cdf(x), dtype=float)
    rem = np.abs(dev - gauss)
    window = (x >= -3.0) & (x <= 3.0)
    sup = float(rem[window].max()) if window.any() else float("nan")
    return CutoffProfile(int(N), float(gamma), x, t, dev, gauss, rem, sup, sup * math.sqrt(N))


def sharp_threshold(c, N, gamma):
    """Occupation of the last timer qubit at c * t_N(0)."""
    if not c > 0:
        raise ValueError("c must be positive")
    return timer_occupation(N, c * N / gamma, gamma)


def timer_spectrum_degeneracy(N, gamma=1.0, tol=1e-8):
    """Dense spectrum of the timer generator: (gap, multiplicity of the slowest nonzero mode, kernel dimension)."""
    from .gadgets import TimerConfig, build_timer

    S = build_timer(TimerConfig(N, gamma)).superoperator()
    ev = np.linalg.eigvals(S)
    zero = np.abs(ev) < tol
    rest = ev[~zero]
    if rest.size == 0:
        return 0.0, 0, int(zero.sum())
    gap = float(np.min(-rest.real))
    mult = int(np.sum(np.abs(-rest.real - gap) < tol * max(1.0, gap)))
    return gap, mult, int(zero.sum())


# ---------------------------------------------------------------------------
# Tricomi bound


@dataclass(frozen=True)
class TricomiResult:
    a: float
    x: float
    log_bound: float
    log_exact: float

    @property
    def bound(self):
        return math.exp(self.log_bound)

    @property
    def exact(self):
        return math.exp(self.log_exact)

    @property
    def margin(self):
        """Relative slack 1 - exact / bound."""
        return -math.expm1(self.log_exact - self.log_bound)


def tricomi_bound(a, x):
    """Gamma(a, x) < e^{-x} x^a / (x - a + 1), valid for x > a - 1, compared in log space."""
    if not a > 0:
        raise ValueError("a must be positive")
    if not x > a - 1:
        raise ValueError("bound only valid for x > a - 1")
    log_bound = -x + a * math.log(x) - math.log(x - a + 1.0)
    _, q = regularized_gamma_pq(a, x)
    log_exact = math.log(q) + math.lgamma(a) if q > 0 else -math.inf
    return TricomiResult(float(a), float(x), log_bound, log_exact)


# ---------------------------------------------------------------------------
# concatenated trigger windows


@dataclass(frozen=True)
class TriggerSchedule:
    L: int
    N: int
    gamma: float

    def __post_init__(self):
        if self.L < 1 or self.N < 2 or not self.gamma > 0:
            raise ValueError("need L >= 1, N >= 2 and gamma > 0")

    def window(self, l):
        if not 1 <= l <= self.L:
            raise ValueError("step index out of range")
        return self.N * (l - 0.5) / self.gamma, self.N * (l + 0.5) / self.gamma

    def windows(self):
        return [self.window(l) for l in range(1, self.L + 1)]


def alpha_rate(l):
    """Late-trigger exponent per timer qubit: 1/2 - l ln(1 + 1/(2l))."""
    return 0.5 - l * math.log1p(0.5 / l)


def beta_rate(l):
    """Early-trigger exponent per timer qubit: -(1/2 + l ln(1 - 1/(2l)))."""
    return -(0.5 + l * math.log1p(-0.5 / l))


@dataclass(frozen=True)
class ConcatenationError:
    l: int
    N: int
    early: float
    late: float
    alpha: float
    beta: float
    early_degree: int | None = None
    late_degree: int | None = None
    log_early: float = field(default=-math.inf, repr=False)
    log_late: float = field(default=-math.inf, repr=False)

    @property
    def total(self):
        return self.early + self.late


def _min_degree(log_exact, log_rate_bound, log_poly_base, max_degree=2):
    for d in range(max_degree + 1):
        if log_exact <= log_rate_bound + d * log_poly_base + 1e-12:
            return d
    return None


def concatenation_error(l, N, gamma=1.0, max_degree=2):
    """Early and late mis-trigger probabilities for step l of a concatenated schedule.

    Step l fires after N l timer decays, so its firing time is Gamma(N l, gamma)
    distributed. Exact tails are regularized gamma values at the window edges
    N(l -/+ 1/2). Each tail is compared to e^{-rate N} (N l)^d and the smallest
    d <= max_degree that certifies it is reported (None if none does).
    """
    if l < 1 or N < 2:
        raise ValueError("need l >= 1 and N >= 2")
    a = N * l
    early, _ = regularized_gamma_pq(a, N * (l - 0.5))
    _, late = regularized_gamma_pq(a, N * (l + 0.5))
    al, be = alpha_rate(l), beta_rate(l)
    log_early = math.log(early) if early > 0 else -math.inf
    log_late = math.log(late) if late > 0 else -math.inf
    base = math.log(N * l)
    return ConcatenationError(
        l,
        N,
        early,
        late,
        al,
        be,
        _min_degree(log_early, -be * N, base, max_degree),
        _min_degree(log_late, -al * N, base, max_degree),
        log_early,
        log_late,
    )


def total_mistrigger(L, N, gamma=1.0):
    """Union bound over the L steps of a schedule."""
    return sum(concatenation_error(l, N, gamma).total for l in range(1, L + 1))


# ---------------------------------------------------------------------------
# truncated-normal inputs


@dataclass(frozen=True)
class TruncatedNormalOverlap:
    N: float
    alpha: float
    beta: float
    xi: float
    log_numeric: float
    log_closed_form: float
    log_bound: float
    regime: str  # "tail" when z1 < 0, "interior" otherwise

    @property
    def numeric(self):
        return math.exp(self.log_numeric)

    @property
    def bound(self):
        return math.exp(self.log_bound)


def _log_diff_ndtr(hi, lo):
    """log(Phi(hi) - Phi(lo)) for hi > lo, stable in both tails."""
    if lo > 0:
        # use upper tails: Phi(hi) - Phi(lo) = Phi(-lo) - Phi(-hi)
        hi, lo = -lo, -hi
    a, b = log_ndtr(hi), log_ndtr(lo)
    return float(a + math.log1p(-math.exp(b - a))) if b < a else -math.inf


def truncated_normal_overlap(M, alpha, beta, omega, Gamma):
    """Overlap of a truncated-normal excitation count with the xi^{-x} survival weight.

    Integrates phi_tr((x - alpha M) / sqrt(beta M)) xi^{-x} over [0, M] with
    xi = 1 + Gamma / omega. The numeric value uses adaptive quadrature on the
    peak-normalized integrand; a normal-CDF closed form is returned alongside.
    The analytic bound is sqrt(beta) / (sqrt(M) |alpha - beta ln xi|) e^{-M alpha^2 / (2 beta)},
    a valid bound only when z1 = M(alpha - beta ln xi) < 0 ("tail" regime). In the
    interior regime the bound e^{-(ln xi / 2) z2} / Z is reported instead.
    """
    if not (0 < alpha <= 1) or not beta > 0:
        raise ValueError("need alpha in (0, 1] and beta > 0")
    if M <= 0 or not (omega > 0 and Gamma > 0):
        raise ValueError("need M > 0 and positive rates")
    N = float(M)
    xi = 1.0 + Gamma / omega
    lx = math.log(xi)
    mu, var = alpha * N, beta * N
    sigma = math.sqrt(var)
    z1 = N * (alpha - beta * lx)
    z2 = N * (2.0 * alpha - beta * lx)
    log_Z = _log_diff_ndtr((N - mu) / sigma, -mu / sigma)
    log_pref = -0.5 * lx * z2 - math.log(sigma * math.sqrt(2.0 * math.pi)) - log_Z

    # integrand e^{-(x - z1)^2 / (2 var)} peaks at clip(z1, 0, N)
    peak = min(max(z1, 0.0), N)
    g0 = -((peak - z1) ** 2) / (2.0 * var)
    edges = sorted({0.0, N, *(min(max(peak + k * sigma, 0.0), N) for k in (-12, -1, 1, 12))})
    val = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi > lo:
            val += integrate.quad(
                lambda x: math.exp(-((x - z1) ** 2) / (2.0 * var) - g0),
                lo,
                hi,
                epsabs=0.0,
                epsrel=1e-12,
                limit=400,
            )[0]
    log_numeric = log_pref + g0 + math.log(val)
    log_closed = log_pref + math.log(sigma * math.sqrt(2.0 * math.pi)) + _log_diff_ndtr((N - z1) / sigma, -z1 / sigma)

    if z1 < 0:
        regime = "tail"
        log_bound = 0.5 * math.log(beta) - 0.5 * math.log(N) - math.log(abs(alpha - beta * lx)) - N * alpha**2 / (2.0 * beta)
    else:
        regime = "interior"
        log_bound = -0.5 * lx * z2 - log_Z
    return TruncatedNormalOverlap(N, alpha, beta, xi, log_numeric, log_closed, log_bound, regime)


def log_slope(Ns, log_values):
    """Least-squares slope of log values against N."""
    return float(np.polyfit(np.asarray(Ns, dtype=float), np.asarray(log_values, dtype=float), 1)[0])


# ---------------------------------------------------------------------------
# imperfect initialization


@dataclass(frozen=True)
class ImperfectInitShift:
    N: int
    eps: float
    t: float
    ideal: float
    perturbed: float
    first_order_coeff: float

    @property
    def shift(self):
        return self.perturbed - self.ideal

    @property
    def first_order_estimate(self):
        return self.N * self.eps

    @property
    def residual(self):
        """Shift minus its exact linear term."""
        return self.shift - self.first_order_coeff * self.eps


def imperfect_init_shift(N, eps, t, gamma=1.0):
    """Trigger probability for the product input with every site flipped independently with probability eps.

    The trigger probability of every basis configuration comes from one adjoint
    pass over the 2^N-state timer chain, then is averaged over the product law.
    """
    if not 0.0 <= eps <= 0.1:
        raise ValueError("eps must lie in [0, 0.1]")
    if N > 20:
        raise ValueError("exhaustive configuration sum limited to N <= 20")
    v = timer_trigger_by_config(N, t, gamma)
    ideal_cfg = (1 << (N - 1)) - 1  # 0 then N-1 ones
    flips = np.array([bin(s ^ ideal_cfg).count("1") for s in range(2**N)])
    if eps == 0.0:
        w = (flips == 0).astype(float)
    else:
        w = eps**flips * (1.0 - eps) ** (N - flips)
    perturbed = float(np.dot(w, v))
    ideal = float(v[ideal_cfg])
    c1 = float(np.sum(v[flips == 1]) - N * ideal)
    return ImperfectInitShift(N, float(eps), float(t), ideal, perturbed, c1)
