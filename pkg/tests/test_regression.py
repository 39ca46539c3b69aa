import numpy as np
import pytest

from oracles import ols_normal_equations
from triadgaze.errors import DegenerateInput, RankDeficient
from triadgaze.stats import ols_regress


def test_exact_line():
    x = np.arange(10.0)
    res = ols_regress({"x": x}, 2 * x, standardize=False)
    assert res.coefficients["x"].beta == pytest.approx(2.0)
    assert res.coefficients["intercept"].beta == pytest.approx(0.0, abs=1e-12)
    assert res.r_squared == pytest.approx(1.0)
    assert np.allclose(res.residuals, 0.0, atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_matches_normal_equations(seed):
    rng = np.random.default_rng(seed)
    n, p = int(rng.integers(12, 200)), int(rng.integers(1, 6))
    X = rng.normal(size=(n, p))
    y = X @ rng.normal(size=p) + rng.normal(size=n)
    res = ols_regress({f"x{i}": X[:, i] for i in range(p)}, y, standardize=False)
    beta, t, f = ols_normal_equations(X, y)
    names = ["intercept"] + [f"x{i}" for i in range(p)]
    for k, name in enumerate(names):
        assert res.coefficients[name].beta == pytest.approx(beta[k], rel=1e-6, abs=1e-12)
        assert res.coefficients[name].t == pytest.approx(t[k], rel=1e-6, abs=1e-12)
    assert res.f_statistic == pytest.approx(f, rel=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_matches_statsmodels(seed):
    sm = pytest.importorskip("statsmodels.api")
    rng = np.random.default_rng(50 + seed)
    n = 80
    X = rng.normal(size=(n, 3))
    y = 0.5 * X[:, 0] - 0.2 * X[:, 2] + rng.normal(size=n)
    ref = sm.OLS(y, sm.add_constant(X)).fit()
    res = ols_regress({"a": X[:, 0], "b": X[:, 1], "c": X[:, 2]}, y, standardize=False)
    got = [res.coefficients[k] for k in ("intercept", "a", "b", "c")]
    assert [c.beta for c in got] == pytest.approx(list(ref.params), rel=1e-9)
    assert [c.std_error for c in got] == pytest.approx(list(ref.bse), rel=1e-9)
    assert [c.p_value for c in got] == pytest.approx(list(ref.pvalues), rel=1e-7)
    ci = ref.conf_int()
    assert [c.ci_low for c in got] == pytest.approx(list(ci[:, 0]), rel=1e-8)
    assert res.f_statistic == pytest.approx(ref.fvalue, rel=1e-9)
    assert res.f_p_value == pytest.approx(ref.f_pvalue, rel=1e-7)
    assert res.r_squared == pytest.approx(ref.rsquared, rel=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_standardizing_keeps_t_and_p(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(3, 5, size=(40, 2))
    y = X[:, 0] + rng.normal(size=40)
    raw = ols_regress({"a": X[:, 0], "b": X[:, 1]}, y, standardize=False)
    std = ols_regress({"a": X[:, 0], "b": X[:, 1]}, y, standardize=True)
    for name in ("a", "b"):
        sd = np.std(X[:, "ab".index(name)], ddof=1)
        assert std.coefficients[name].beta == pytest.approx(raw.coefficients[name].beta * sd, rel=1e-9)
        assert std.coefficients[name].std_error == pytest.approx(raw.coefficients[name].std_error * sd, rel=1e-9)
        assert std.coefficients[name].t == pytest.approx(raw.coefficients[name].t, rel=1e-9)
        assert std.coefficients[name].p_value == pytest.approx(raw.coefficients[name].p_value, rel=1e-9)
    assert std.f_statistic == pytest.approx(raw.f_statistic, rel=1e-9)


def test_collinear_columns_are_named():
    x = np.arange(10.0)
    with pytest.raises(RankDeficient) as err:
        ols_regress({"week": x, "copy": 2 * x + 1, "other": np.sin(x)}, x ** 2, standardize=False)
    assert {"week", "copy"} <= set(err.value.columns)
    assert "other" not in err.value.columns


def test_constant_predictor_is_rank_deficient_when_standardized():
    with pytest.raises(RankDeficient):
        ols_regress({"c": np.ones(8), "x": np.arange(8.0)}, np.arange(8.0))


def test_too_few_rows():
    with pytest.raises(DegenerateInput):
        ols_regress({"a": [1.0, 2.0], "b": [0.0, 1.0]}, [1.0, 2.0])


def test_repeated_measures_are_flagged():
    rng = np.random.default_rng(0)
    x = rng.normal(size=12)
    res = ols_regress({"x": x}, x + rng.normal(size=12), clusters=["a", "b", "c"] * 4)
    assert any("repeated measures" in n for n in res.notes)


def test_permuted_response_gives_uniform_p():
    from scipy.stats import kstest

    rng = np.random.default_rng(11)
    X = rng.normal(size=(60, 3))
    y = X[:, 0] + rng.normal(size=60)
    ps = [ols_regress({"a": X[:, 0], "b": X[:, 1], "c": X[:, 2]}, rng.permutation(y)).f_p_value
          for _ in range(1000)]
    assert kstest(ps, "uniform").pvalue > 0.01
