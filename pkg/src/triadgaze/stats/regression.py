"""Ordinary least squares with coefficient t-tests and the overall F-test."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import DegenerateInput, RankDeficient
from .distributions import f_sf, t_ppf, t_two_sided


@dataclass(frozen=True)
class Coefficient:
    beta: float
    std_error: float
    t: float
    p_value: float
    ci_low: float
    ci_high: float

    def covers(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high


@dataclass
class RegressionResult:
    coefficients: dict[str, Coefficient]
    f_statistic: float
    f_p_value: float
    r_squared: float
    n: int
    df_model: int
    df_resid: int
    standardized: bool
    residuals: np.ndarray = field(repr=False)
    notes: list[str] = field(default_factory=list)

    def as_record(self) -> dict:
        return {
            "n": self.n,
            "df": [self.df_model, self.df_resid],
            "F": self.f_statistic,
            "p": self.f_p_value,
            "r_squared": self.r_squared,
            "standardized": self.standardized,
            "coefficients": {
                name: {"beta": c.beta, "se": c.std_error, "t": c.t, "p": c.p_value}
                for name, c in self.coefficients.items()
            },
            "notes": list(self.notes),
        }


def _collinear_columns(X: np.ndarray, names: list[str]) -> list[str]:
    _, s, vt = np.linalg.svd(X, full_matrices=False)
    tol = max(X.shape) * np.finfo(float).eps * s[0]
    null = vt[s <= tol]
    if null.size == 0:
        return []
    involved = np.any(np.abs(null) > 1e-8, axis=0)
    return [n for n, hit in zip(names, involved) if hit]


def ols_regress(
    predictors: Mapping[str, Sequence[float]],
    response: Sequence[float],
    *,
    standardize: bool = True,
    intercept: bool = True,
    clusters: Sequence | None = None,
    level: float = 0.95,
) -> RegressionResult:
    """Fit ``response ~ predictors`` by least squares.

    With ``standardize`` each predictor is z-scored (sample SD) before fitting so
    betas are comparable across covariates; t and p are unaffected. ``clusters``
    (e.g. participant ids) only feeds a repeated-measures note in the result.
    """
    names = list(predictors)
    y = np.asarray(response, dtype=float)
    n = y.size
    cols = []
    for name in names:
        col = np.asarray(predictors[name], dtype=float)
        if col.shape != (n,):
            raise DegenerateInput(f"predictor {name!r} has {col.size} rows, response has {n}")
        cols.append(col)
    if not np.all(np.isfinite(y)) or any(not np.all(np.isfinite(c)) for c in cols):
        raise DegenerateInput("non-finite values in regression input")
    p = len(names)
    if n <= p + 1:
        raise DegenerateInput(f"need n > predictors + 1 (n={n}, predictors={p})")

    if standardize:
        scaled = []
        for name, col in zip(names, cols):
            sd = float(np.std(col, ddof=1))
            if sd == 0.0:
                raise RankDeficient([name])
            scaled.append((col - col.mean()) / sd)
        cols = scaled

    design_names = (["intercept"] if intercept else []) + names
    X = np.column_stack(([np.ones(n)] if intercept else []) + cols) if design_names else np.empty((n, 0))
    bad = _collinear_columns(X, design_names)
    if bad:
        raise RankDeficient(bad)

    q, r = np.linalg.qr(X)
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - X @ beta
    df_resid = n - X.shape[1]
    sse = float(resid @ resid)
    sigma2 = sse / df_resid
    r_inv = np.linalg.inv(r)
    cov = sigma2 * (r_inv @ r_inv.T)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    sst = float(np.sum((y - y.mean()) ** 2)) if intercept else float(y @ y)
    if sst == 0.0:
        raise DegenerateInput("response has zero variance")
    r2 = min(1.0, max(0.0, 1.0 - sse / sst))
    if p == 0:
        f_stat, f_p = math.nan, math.nan
    elif sse == 0.0:
        f_stat, f_p = math.inf, 0.0
    else:
        f_stat = ((sst - sse) / p) / sigma2
        f_p = f_sf(f_stat, p, df_resid)

    crit = t_ppf(0.5 + level / 2.0, df_resid)
    coefs = {}
    for name, b, s in zip(design_names, beta, se):
        b, s = float(b), float(s)
        if s > 0:
            t = b / s
            pv = t_two_sided(t, df_resid)
        else:
            t = math.copysign(math.inf, b) if b != 0 else 0.0
            pv = 0.0 if b != 0 else 1.0
        coefs[name] = Coefficient(b, s, t, pv, b - crit * s, b + crit * s)

    notes = []
    if clusters is not None:
        labels = list(clusters)
        m = len(set(labels))
        if m < len(labels):
            notes.append(
                f"repeated measures: {len(labels)} rows from {m} clusters; "
                "OLS standard errors assume independent rows"
            )
    return RegressionResult(coefs, f_stat, f_p, r2, n, p, df_resid, standardize, resid, notes)
