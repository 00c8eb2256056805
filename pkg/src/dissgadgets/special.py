"""Regularized incomplete gamma functions and the standard normal CDF."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from . import kernels


def _check_gamma_args(a, x):
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(a)) or np.any(a <= 0):
        raise ValueError("shape parameter a must be finite and positive")
    if np.any(np.isnan(x)) or np.any(x < 0):
        raise ValueError("argument x must be nonnegative")
    return a, x


def _scalar_or_array(v):
    return float(v) if np.ndim(v) == 0 else v


def regularized_gamma_pq(a, x):
    """(P(a, x), Q(a, x)), each computed directly so the smaller one keeps full relative precision."""
    a, x = _check_gamma_args(a, x)
    p, q = kernels.gamma_pq(a, x)
    return _scalar_or_array(p), _scalar_or_array(q)


def regularized_gamma_lower(a, x):
    """P(a, x) = gamma(a, x) / Gamma(a)."""
    return regularized_gamma_pq(a, x)[0]


def regularized_gamma_upper(a, x):
    """Q(a, x) = Gamma(a, x) / Gamma(a)."""
    return regularized_gamma_pq(a, x)[1]


def log_upper_gamma(a, x):
    """log of the unregularized upper incomplete gamma Gamma(a, x)."""
    q = regularized_gamma_upper(a, x)
    return math.log(q) + math.lgamma(a) if q > 0 else -math.inf


def normal_cdf(x):
    """Standard normal CDF via erfc, accurate in both tails."""
    if np.ndim(x) == 0:
        return 0.5 * math.erfc(-float(x) / math.sqrt(2.0))
    return ndtr(np.asarray(x, dtype=float))
