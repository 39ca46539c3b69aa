"""Classical hypothesis tests: normality, t, z, one-way ANOVA, Levene, Tukey HSD."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from ..errors import DegenerateInput
from .distributions import (
    f_sf,
    norm_cdf,
    norm_ppf,
    norm_sf,
    studentized_range_sf,
    t_cdf,
    t_sf,
    t_two_sided,
)

ALTERNATIVES = ("two-sided", "greater", "less")


@dataclass(frozen=True)
class TestResult:
    """One reported statistic.

    ``df`` is a single number for t, a ``(numerator, denominator)`` pair for F-like
    statistics and ``(k, df)`` for the studentized range.
    """

    __test__ = False  # keep pytest from collecting this class

    statistic_name: str
    value: float
    p_value: float
    df: float | tuple[float, float] | None = None
    detail: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0) and not math.isnan(self.p_value):
            raise ValueError(f"p-value out of range: {self.p_value}")

    def as_record(self) -> dict:
        df = list(self.df) if isinstance(self.df, tuple) else self.df
        return {"statistic": self.statistic_name, "value": self.value, "df": df, "p": self.p_value}


def _tail_from_t(t: float, df: float, alternative: str) -> float:
    if alternative == "two-sided":
        return t_two_sided(t, df)
    if alternative == "greater":
        return t_sf(t, df)
    if alternative == "less":
        return t_cdf(t, df)
    raise ValueError(f"alternative must be one of {ALTERNATIVES}")


def _tail_from_z(z: float, alternative: str) -> float:
    if alternative == "two-sided":
        return min(1.0, 2.0 * norm_sf(abs(z)))
    if alternative == "greater":
        return norm_sf(z)
    if alternative == "less":
        return norm_cdf(z)
    raise ValueError(f"alternative must be one of {ALTERNATIVES}")


# -- Shapiro-Wilk (Royston 1995, AS R94) -------------------------------------

_C1 = (0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.544, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(coefs, x):
    out = 0.0
    for c in reversed(coefs):
        out = out * x + c
    return out


def _shapiro_coefficients(n: int) -> np.ndarray:
    nn2 = n // 2
    if n == 3:
        return np.array([math.sqrt(0.5)])
    an25 = n + 0.25
    m = np.array([norm_ppf((i - 0.375) / an25) for i in range(1, nn2 + 1)])
    summ2 = 2.0 * float(np.sum(m * m))
    ssumm2 = math.sqrt(summ2)
    rsn = 1.0 / math.sqrt(n)
    a1 = _poly(_C1, rsn) - m[0] / ssumm2
    if n > 5:
        a2 = -m[1] / ssumm2 + _poly(_C2, rsn)
        fac = math.sqrt((summ2 - 2.0 * m[0] ** 2 - 2.0 * m[1] ** 2) / (1.0 - 2.0 * a1 ** 2 - 2.0 * a2 ** 2))
        a = -m / fac
        a[0], a[1] = a1, a2
    else:
        fac = math.sqrt((summ2 - 2.0 * m[0] ** 2) / (1.0 - 2.0 * a1 ** 2))
        a = -m / fac
        a[0] = a1
    return a


def shapiro_wilk(x: Sequence[float]) -> TestResult:
    """Shapiro-Wilk W with Royston's normalizing approximation for the p-value."""
    x = np.sort(np.asarray(x, dtype=float))
    n = x.size
    if n < 3 or n > 5000:
        raise DegenerateInput(f"Shapiro-Wilk needs 3 <= n <= 5000 (got {n})")
    if not np.all(np.isfinite(x)):
        raise DegenerateInput("sample contains non-finite values")
    span = x[-1] - x[0]
    if span <= 1e-19 * max(1.0, abs(x[0])):
        raise DegenerateInput("sample has zero variance")
    a = _shapiro_coefficients(n)
    nn2 = n // 2
    xs = (x - x.mean()) / span
    numerator = float(np.dot(a, xs[::-1][:nn2] - xs[:nn2]))
    ss = float(np.dot(xs, xs))
    w = min(1.0, numerator * numerator / ss)

    if n == 3:
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.pi / 3.0)
        p = min(1.0, max(0.0, p))
        return TestResult("W_shapiro", w, p, detail={"n": n})
    if w >= 1.0:
        return TestResult("W_shapiro", w, 1.0, detail={"n": n})
    w1 = math.log(1.0 - w)
    if n <= 11:
        gamma = _poly(_G, n)
        if w1 >= gamma:
            return TestResult("W_shapiro", w, 1e-99, detail={"n": n})
        y = -math.log(gamma - w1)
        mean = _poly(_C3, n)
        sd = math.exp(_poly(_C4, n))
    else:
        ln_n = math.log(n)
        y = w1
        mean = _poly(_C5, ln_n)
        sd = math.exp(_poly(_C6, ln_n))
    return TestResult("W_shapiro", w, norm_sf((y - mean) / sd), detail={"n": n})


# -- t and z -----------------------------------------------------------------

def paired_t(a: Sequence[float], b: Sequence[float], alternative: str = "two-sided") -> TestResult:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DegenerateInput("paired samples must be 1-D and of equal length")
    n = a.size
    if n < 2:
        raise DegenerateInput("paired t needs at least two pairs")
    d = a - b
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        raise DegenerateInput("differences have zero variance")
    t = float(np.mean(d)) / (sd / math.sqrt(n))
    return TestResult("t", t, _tail_from_t(t, n - 1, alternative), df=float(n - 1),
                      detail={"n": n, "mean_diff": float(np.mean(d))})


def pooled_t(a: Sequence[float], b: Sequence[float], alternative: str = "two-sided") -> TestResult:
    """Two-sample Student t with pooled variance."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise DegenerateInput("each sample needs at least two values")
    df = na + nb - 2
    sp2 = (np.sum((a - a.mean()) ** 2) + np.sum((b - b.mean()) ** 2)) / df
    if sp2 == 0.0:
        raise DegenerateInput("pooled variance is zero")
    t = float((a.mean() - b.mean()) / math.sqrt(sp2 * (1.0 / na + 1.0 / nb)))
    return TestResult("t", t, _tail_from_t(t, df, alternative), df=float(df))


def two_proportion_z(p1: float, n1: int, p2: float, n2: int, alternative: str = "greater") -> TestResult:
    """Pooled two-proportion z-test; ``p1``/``p2`` are sample proportions.

    The default one-tailed alternative is p1 > p2.
    """
    if n1 <= 0 or n2 <= 0:
        raise DegenerateInput("group sizes must be positive")
    if not (0.0 <= p1 <= 1.0 and 0.0 <= p2 <= 1.0):
        raise DegenerateInput("proportions must lie in [0, 1]")
    pooled = (p1 * n1 + p2 * n2) / (n1 + n2)
    var = pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2)
    if var <= 0.0:
        raise DegenerateInput("pooled proportion is 0 or 1")
    z = (p1 - p2) / math.sqrt(var)
    return TestResult("z", z, _tail_from_z(z, alternative),
                      detail={"p1": p1, "n1": n1, "p2": p2, "n2": n2, "pooled": pooled})


# -- ANOVA family --------------------------------------------------------------

def _as_groups(groups) -> list[np.ndarray]:
    out = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(out) < 2:
        raise DegenerateInput("need at least two groups")
    if any(g.size < 2 for g in out):
        raise DegenerateInput("each group needs at least two observations")
    return out


def _oneway(groups: list[np.ndarray]) -> tuple[float, float, float, float]:
    k = len(groups)
    n_total = sum(g.size for g in groups)
    grand = sum(float(g.sum()) for g in groups) / n_total
    ssb = sum(g.size * (float(g.mean()) - grand) ** 2 for g in groups)
    ssw = sum(float(np.sum((g - g.mean()) ** 2)) for g in groups)
    dfb, dfw = k - 1, n_total - k
    if ssw == 0.0:
        if ssb == 0.0:
            raise DegenerateInput("all observations are identical")
        return math.inf, 0.0, dfb, dfw
    f = (ssb / dfb) / (ssw / dfw)
    return f, f_sf(f, dfb, dfw), dfb, dfw


def anova_oneway(groups) -> TestResult:
    groups = _as_groups(groups)
    f, p, dfb, dfw = _oneway(groups)
    return TestResult("F", f, p, df=(float(dfb), float(dfw)))


def levene(groups, center: str = "mean") -> TestResult:
    """Levene's test; ``center='median'`` gives the Brown-Forsythe variant."""
    groups = _as_groups(groups)
    if center == "mean":
        dev = [np.abs(g - g.mean()) for g in groups]
    elif center == "median":
        dev = [np.abs(g - np.median(g)) for g in groups]
    else:
        raise ValueError("center must be 'mean' or 'median'")
    f, p, dfb, dfw = _oneway(dev)
    return TestResult("w_levene", f, p, df=(float(dfb), float(dfw)), detail={"center": center})


def tukey_hsd(groups, labels: Sequence[str] | None = None) -> dict[tuple[str, str], TestResult]:
    """All-pairs Tukey-Kramer comparisons keyed by ``(label_i, label_j)`` with i < j."""
    groups = _as_groups(groups)
    k = len(groups)
    labels = [str(i) for i in range(k)] if labels is None else [str(x) for x in labels]
    if len(labels) != k or len(set(labels)) != k:
        raise ValueError("labels must be unique and match the number of groups")
    n_total = sum(g.size for g in groups)
    df = n_total - k
    mse = sum(float(np.sum((g - g.mean()) ** 2)) for g in groups) / df
    if mse == 0.0:
        raise DegenerateInput("within-group variance is zero")
    out = {}
    for i, j in combinations(range(k), 2):
        gi, gj = groups[i], groups[j]
        diff = float(gi.mean() - gj.mean())
        se = math.sqrt(0.5 * mse * (1.0 / gi.size + 1.0 / gj.size))
        q = abs(diff) / se
        out[(labels[i], labels[j])] = TestResult(
            "q_tukey", q, studentized_range_sf(q, k, df), df=(float(k), float(df)),
            detail={"mean_diff": diff},
        )
    return out
