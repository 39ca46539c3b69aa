"""Tail probabilities for the reference distributions used by the test battery.

Everything here is scalar-first and built on the regularized incomplete beta
function (Lentz continued fraction). The studentized range is integrated
numerically with composite Gauss-Legendre rules.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

_EPS = 1e-16
_FPMIN = 1e-300
_MAXIT = 10_000


def _betacf(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta failed to converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def betainc_upper(a: float, b: float, x: float) -> float:
    """1 - I_x(a, b), evaluated without cancellation in the upper tail."""
    return betainc(b, a, 1.0 - x)


# -- normal -----------------------------------------------------------------

def norm_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)


def _poly(coefs, x):
    out = 0.0
    for c in reversed(coefs):
        out = out * x + c
    return out


def norm_ppf(p: float) -> float:
    """Inverse normal CDF (Wichura's AS 241, ~1e-16 relative)."""
    if not 0.0 < p < 1.0:
        if p == 0.0:
            return -math.inf
        if p == 1.0:
            return math.inf
        raise ValueError("p must lie in [0, 1]")
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _poly(_A, r) / _poly(_B, r)
    r = p if q < 0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        val = _poly(_C, r) / _poly(_D, r)
    else:
        r -= 5.0
        val = _poly(_E, r) / _poly(_F, r)
    return -val if q < 0 else val


# -- t and F ----------------------------------------------------------------

def t_sf(t: float, df: float) -> float:
    """P(T > t) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    tail = 0.5 * betainc(df / 2.0, 0.5, df / (df + t * t))
    return tail if t >= 0 else 1.0 - tail


def t_cdf(t: float, df: float) -> float:
    return t_sf(-t, df)


def t_two_sided(t: float, df: float) -> float:
    return min(1.0, 2.0 * t_sf(abs(t), df))


def t_ppf(p: float, df: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if p == 0.5:
        return 0.0
    hi = 1.0
    while t_cdf(hi, df) < max(p, 1.0 - p):
        hi *= 2.0
    if p > 0.5:
        return brentq(lambda x: t_cdf(x, df) - p, 0.0, hi, xtol=1e-14, rtol=1e-14)
    return -brentq(lambda x: t_cdf(x, df) - (1.0 - p), 0.0, hi, xtol=1e-14, rtol=1e-14)


def f_sf(f: float, dfn: float, dfd: float) -> float:
    """P(F > f) for the F distribution."""
    if dfn <= 0 or dfd <= 0:
        raise ValueError("degrees of freedom must be positive")
    if f <= 0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return betainc(dfd / 2.0, dfn / 2.0, dfd / (dfd + dfn * f))


# -- studentized range ------------------------------------------------------

@lru_cache(maxsize=8)
def _gl(n: int):
    return np.polynomial.legendre.leggauss(n)


def _composite_nodes(lo: float, hi: float, panels: int, order: int = 20):
    x, w = _gl(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _range_sf_known_scale(w: np.ndarray, k: int) -> np.ndarray:
    """P(range of k iid N(0,1) > w), vectorized over ``w``.

    Uses 1 - W(w) = k * int phi(z) Phi(z-w) sum_i Phi(z)^(k-2-i) (Phi(z)-Phi(z-w))^i dz,
    which keeps tiny tails free of cancellation.
    """
    w = np.atleast_1d(np.asarray(w, dtype=float))
    lo, hi = -9.0, float(w.max()) + 9.0
    panels = max(8, int(math.ceil((hi - lo) / 1.5)))
    z, wt = _composite_nodes(lo, hi, panels)
    phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    big = ndtr(z)[None, :]
    small = ndtr(z[None, :] - w[:, None])
    diff = big - small
    acc = np.zeros_like(small)
    for i in range(k - 1):
        acc += big ** (k - 2 - i) * diff ** i
    out = k * (small * acc) @ (wt * phi)
    out[w <= 0] = 1.0
    return np.clip(out, 0.0, 1.0)


def studentized_range_sf(q: float, k: int, df: float) -> float:
    """Upper tail of the studentized range distribution Q(k, df)."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if df <= 0:
        raise ValueError("df must be positive")
    if q <= 0:
        return 1.0
    if math.isinf(df) or df > 1e6:
        return float(_range_sf_known_scale(np.array([q]), k)[0])
    # S = sqrt(chi2_df / df); integrate its density against the known-scale tail.
    spread = 12.0 / math.sqrt(2.0 * df)
    s_lo = max(0.0, 1.0 - spread) if df > 30 else 0.0
    s_hi = math.sqrt((df + 12.0 * math.sqrt(2.0 * df) + 80.0) / df)
    s, ws = _composite_nodes(s_lo, s_hi, 12, order=20)
    log_const = (
        0.5 * df * math.log(df) - math.lgamma(df / 2.0) - (df / 2.0 - 1.0) * math.log(2.0)
    )
    with np.errstate(divide="ignore"):
        log_dens = log_const + (df - 1.0) * np.log(s) - 0.5 * df * s * s
    dens = np.exp(log_dens)
    tail = _range_sf_known_scale(q * s, k)
    return float(min(1.0, max(0.0, np.sum(ws * dens * tail))))
