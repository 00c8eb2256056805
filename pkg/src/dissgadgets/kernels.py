"""Hot numeric kernels with a numba path and a pure numpy path.

Every public function here dispatches on :data:`dissgadgets._accel.USE_NUMBA`.
Both implementations are importable directly (``*_numba`` / ``*_numpy``) so
tests and the benchmark can compare them in one process.
"""

import math

import numpy as np
import scipy.sparse as sp

from ._accel import USE_NUMBA, optional_njit

_MAXIT = 10_000_000
_REL_STOP = 1e-17
_TINY = 1e-300
# Uniformization splits [0, t] so that lambda*h stays below this; keeps exp(-lambda*h) representable.
UNIFORMIZATION_CHUNK = 400.0


# ---------------------------------------------------------------------------
# scalar helpers (compiled when numba is present)


@optional_njit(cache=True)
def _log1pmx(eta):
    # log(1 + eta) - eta
    if abs(eta) < 0.2:
        s = 0.0
        p = eta * eta
        k = 2
        sign = -1.0
        while True:
            t = sign * p / k
            s += t
            if abs(t) <= _REL_STOP * abs(s):
                break
            p *= eta
            k += 1
            sign = -sign
        return s
    return math.log1p(eta) - eta


@optional_njit(cache=True)
def _stirling_tail(a):
    # lgamma(a + 1) - ((a + 1/2) log a - a + log(2 pi)/2), valid for a >= 20
    r = 1.0 / a
    r2 = r * r
    return r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 / 1188.0))))


@optional_njit(cache=True)
def log_poisson_prefix(a, x):
    """log(x**a * exp(-x) / Gamma(a + 1)), cancellation-free for large ``a``."""
    if a < 20.0:
        return a * math.log(x) - x - math.lgamma(a + 1.0)
    return a * _log1pmx((x - a) / a) - 0.5 * math.log(2.0 * math.pi * a) - _stirling_tail(a)


@optional_njit(cache=True)
def _gamma_p_series(a, x):
    s = 1.0
    term = 1.0
    n = 1
    while n < _MAXIT:
        term *= x / (a + n)
        s += term
        if term < _REL_STOP * s:
            break
        n += 1
    return math.exp(log_poisson_prefix(a, x) + math.log(s))


@optional_njit(cache=True)
def _gamma_q_cf(a, x):
    # modified Lentz on the Legendre continued fraction, x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    i = 1
    while i < _MAXIT:
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
        i += 1
    return math.exp(log_poisson_prefix(a, x) + math.log(a * h))


@optional_njit(cache=True)
def _gamma_pq_scalar(a, x):
    if x <= 0.0:
        return 0.0, 1.0
    if x < a + 1.0:
        p = _gamma_p_series(a, x)
        return p, 1.0 - p
    q = _gamma_q_cf(a, x)
    return 1.0 - q, q


@optional_njit(cache=True)
def _gamma_pq_loop(a, x, p_out, q_out):
    for i in range(a.shape[0]):
        p, q = _gamma_pq_scalar(a[i], x[i])
        p_out[i] = p
        q_out[i] = q


@optional_njit(cache=True)
def _poisson_upper_scalar(n, x):
    # sum_{k >= n} exp(-x) x^k / k!  for integer n >= 1
    if x <= 0.0:
        return 0.0
    if x < n:
        term = math.exp(log_poisson_prefix(float(n), x))
        s = term
        k = n
        while term >= _REL_STOP * s and term > 0.0:
            k += 1
            term *= x / k
            s += term
        return s
    k = n - 1
    term = math.exp(log_poisson_prefix(float(k), x))
    s = term
    while k > 0 and term >= _REL_STOP * s:
        term *= k / x
        k -= 1
        s += term
    return 1.0 - s


@optional_njit(cache=True)
def _poisson_upper_loop(n, x, out):
    for i in range(n.shape[0]):
        out[i] = _poisson_upper_scalar(n[i], x[i])


@optional_njit(cache=True)
def _uniformize_numba(indptr, indices, data, lam, p0, t, tol):
    n = p0.shape[0]
    p = p0.copy()
    if t <= 0.0 or lam <= 0.0:
        return p
    nchunks = int(math.ceil(lam * t / UNIFORMIZATION_CHUNK))
    h = t / nchunks
    lh = lam * h
    chunk_tol = max(tol / nchunks, _TINY)
    v = np.empty(n)
    tmp = np.empty(n)
    acc = np.empty(n)
    for _ in range(nchunks):
        w = math.exp(-lh)
        for i in range(n):
            v[i] = p[i]
            acc[i] = w * p[i]
        k = 0
        while True:
            if k > lh and w * (k + 1) / (k + 1 - lh) < chunk_tol:
                break
            k += 1
            for i in range(n):
                s = 0.0
                for jj in range(indptr[i], indptr[i + 1]):
                    s += data[jj] * v[indices[jj]]
                tmp[i] = s
            w *= lh / k
            for i in range(n):
                v[i] = tmp[i]
                acc[i] += w * tmp[i]
        for i in range(n):
            p[i] = acc[i]
    return p


# ---------------------------------------------------------------------------
# numpy implementations


def _log1pmx_numpy(eta):
    eta = np.asarray(eta, dtype=float)
    with np.errstate(divide="ignore"):  # eta = -1 (x = 0) correctly gives -inf
        out = np.log1p(eta) - eta
    small = np.abs(eta) < 0.2
    if small.any():
        e = eta[small]
        s = np.zeros_like(e)
        p = e * e
        sign = -1.0
        for k in range(2, 40):
            s += sign * p / k
            p = p * e
            sign = -sign
        out[small] = s
    return out


def log_poisson_prefix_numpy(a, x):
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    out = np.empty(np.broadcast(a, x).shape)
    a, x = np.broadcast_arrays(a, x)
    small = a < 20.0
    if small.any():
        from scipy.special import gammaln

        out[small] = a[small] * np.log(x[small]) - x[small] - gammaln(a[small] + 1.0)
    big = ~small
    if big.any():
        ab, xb = a[big], x[big]
        r = 1.0 / ab
        r2 = r * r
        tail = r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 / 1188.0))))
        out[big] = ab * _log1pmx_numpy((xb - ab) / ab) - 0.5 * np.log(2.0 * np.pi * ab) - tail
    return out


def gamma_pq_numpy(a, x):
    a, x = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    shape = a.shape
    a = a.ravel()
    x = x.ravel()
    p = np.zeros(a.shape)
    q = np.ones(a.shape)
    pos = x > 0
    ser = pos & (x < a + 1.0)
    cf = pos & ~ser
    if ser.any():
        aa, xx = a[ser], x[ser]
        s = np.ones_like(aa)
        term = np.ones_like(aa)
        active = np.ones(aa.shape, dtype=bool)
        n = 1
        while active.any():
            term[active] *= xx[active] / (aa[active] + n)
            s[active] += term[active]
            active &= term >= _REL_STOP * s
            n += 1
        pp = np.exp(log_poisson_prefix_numpy(aa, xx) + np.log(s))
        p[ser] = pp
        q[ser] = 1.0 - pp
    if cf.any():
        aa, xx = a[cf], x[cf]
        b = xx + 1.0 - aa
        c = np.full_like(aa, 1.0 / _TINY)
        d = 1.0 / b
        h = d.copy()
        active = np.ones(aa.shape, dtype=bool)
        i = 1
        while active.any():
            an = -i * (i - aa[active])
            b[active] += 2.0
            dd = an * d[active] + b[active]
            dd = np.where(np.abs(dd) < _TINY, _TINY, dd)
            cc = b[active] + an / c[active]
            cc = np.where(np.abs(cc) < _TINY, _TINY, cc)
            dd = 1.0 / dd
            delta = dd * cc
            d[active] = dd
            c[active] = cc
            h[active] *= delta
            done = np.abs(delta - 1.0) < 1e-16
            idx = np.flatnonzero(active)
            active[idx[done]] = False
            i += 1
        qq = np.exp(log_poisson_prefix_numpy(aa, xx) + np.log(aa * h))
        q[cf] = qq
        p[cf] = 1.0 - qq
    return p.reshape(shape), q.reshape(shape)


def gamma_pq_numba(a, x):
    a, x = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    shape = a.shape
    af = np.ascontiguousarray(a.ravel())
    xf = np.ascontiguousarray(x.ravel())
    p = np.empty(af.shape)
    q = np.empty(af.shape)
    _gamma_pq_loop(af, xf, p, q)
    return p.reshape(shape), q.reshape(shape)


def poisson_upper_numpy(n, x):
    n, x = np.broadcast_arrays(np.asarray(n, dtype=np.int64), np.asarray(x, dtype=float))
    out = np.empty(n.shape, dtype=float)
    for idx in np.ndindex(n.shape):
        ni, xi = int(n[idx]), float(x[idx])
        if xi <= 0.0:
            out[idx] = 0.0
            continue
        width = int(40.0 * math.sqrt(xi) + 60)
        if xi < ni:
            k = np.arange(ni, ni + width, dtype=float)
            logs = float(log_poisson_prefix_numpy(float(ni), xi)) + np.concatenate(
                ([0.0], np.cumsum(np.log(xi / k[1:])))
            )
            out[idx] = np.exp(logs).sum()
        else:
            lo = max(ni - 1 - width, 0)
            k = np.arange(ni - 1, lo - 1, -1, dtype=float)
            logs = float(log_poisson_prefix_numpy(float(ni - 1), xi)) + np.concatenate(
                ([0.0], np.cumsum(np.log(k[:-1] / xi)))
            )
            out[idx] = 1.0 - np.exp(logs).sum()
    return out


def poisson_upper_numba(n, x):
    n, x = np.broadcast_arrays(np.asarray(n, dtype=np.int64), np.asarray(x, dtype=float))
    shape = n.shape
    nf = np.ascontiguousarray(n.ravel())
    xf = np.ascontiguousarray(x.ravel())
    out = np.empty(nf.shape)
    _poisson_upper_loop(nf, xf, out)
    return out.reshape(shape)


def uniformize_numpy(P, lam, p0, t, tol):
    p = np.array(p0, dtype=float)
    if t <= 0.0 or lam <= 0.0:
        return p
    nchunks = int(math.ceil(lam * t / UNIFORMIZATION_CHUNK))
    lh = lam * t / nchunks
    chunk_tol = max(tol / nchunks, _TINY)
    for _ in range(nchunks):
        w = math.exp(-lh)
        v = p
        acc = w * v
        k = 0
        while not (k > lh and w * (k + 1) / (k + 1 - lh) < chunk_tol):
            k += 1
            v = P @ v
            w *= lh / k
            acc += w * v
        p = acc
    return p


def uniformize_numba(P, lam, p0, t, tol):
    P = sp.csr_matrix(P)
    return _uniformize_numba(
        P.indptr.astype(np.int64),
        P.indices.astype(np.int64),
        P.data.astype(float),
        float(lam),
        np.ascontiguousarray(p0, dtype=float),
        float(t),
        float(tol),
    )


# ---------------------------------------------------------------------------
# dispatch

if USE_NUMBA:
    gamma_pq = gamma_pq_numba
    poisson_upper = poisson_upper_numba
    uniformize = uniformize_numba
else:
    gamma_pq = gamma_pq_numpy
    poisson_upper = poisson_upper_numpy
    uniformize = uniformize_numpy

gamma_pq.__doc__ = "Regularized incomplete gamma pair (P(a, x), Q(a, x)), elementwise."
poisson_upper.__doc__ = "Poisson upper tail sum_{k >= n} exp(-x) x^k / k!, elementwise, integer n >= 1."
uniformize.__doc__ = """Action of exp(t Q) on ``p0`` by uniformization.

``P`` is the uniformized stochastic matrix ``I + Q / lam`` (columns are source
states); the Poisson series is truncated with a geometric tail bound so that
the total-variation truncation error is below ``tol``.
"""
