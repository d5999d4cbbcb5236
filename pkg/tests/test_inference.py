import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from resilab.errors import RankDeficient, SeriesTooShort
from resilab.inference import (
    andrews_lag,
    long_run_variance,
    newey_west_mean,
    ols,
    stars,
    white_cov,
    white_se,
)


def _ar1_with_rho(rho, T):
    """AR(1) path whose demeaned lag-1 autocorrelation equals ``rho`` (bisection on phi)."""
    lo, hi = -0.999, 0.999
    rng = np.random.default_rng(0)
    base = rng.standard_normal(T)

    def rho_hat(phi):
        y = np.empty(T)
        y[0] = base[0]
        for t in range(1, T):
            y[t] = phi * y[t - 1] + base[t]
        d = y - y.mean()
        return (d[1:] @ d[:-1]) / (d @ d), y

    x = base
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r, x = rho_hat(mid)
        if r < rho:
            lo = mid
        else:
            hi = mid
    return x


def test_andrews_lag_hand_evaluation():
    x = _ar1_with_rho(0.5, 20)
    d = x - x.mean()
    assert (d[1:] @ d[:-1]) / (d @ d) == pytest.approx(0.5, abs=1e-12)
    s_star = 1.1447 * (4 * 0.25 * 20 / (0.25 * 2.25)) ** (1 / 3)
    assert s_star == pytest.approx(3.764, abs=1e-3)
    assert andrews_lag(x) == 3


def test_andrews_lag_zero_autocorrelation():
    x = np.tile([1.0, 0.0, -1.0, 0.0], 5)
    d = x - x.mean()
    assert d[1:] @ d[:-1] == 0.0
    assert andrews_lag(x) == 0


def test_andrews_short_series():
    with pytest.raises(SeriesTooShort):
        andrews_lag(np.arange(7.0))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(8, 60), elements=st.floats(-1, 1)), st.integers(-20, 20))
def test_andrews_scale_invariant(x, k):
    if np.ptp(x) < 1e-100:
        return
    assert andrews_lag(x * 2.0**k) == andrews_lag(x)


def test_andrews_scale_invariant_general_constants():
    x = np.random.default_rng(2).standard_normal(250).cumsum() * 0.01
    assert all(andrews_lag(x * c) == andrews_lag(x) for c in (1e-3, 0.37, 3.1, 123.456, 2.0**30))


def test_lag_zero_is_variance_of_mean():
    x = np.random.default_rng(3).normal(0.001, 0.02, 40)
    t = newey_west_mean(x, lag=0)
    d = x - x.mean()
    assert abs(t.hac_se**2 - (d @ d) / 40 / 40) <= 1e-14
    assert t.lag == 0 and t.t_stat == t.mean / t.hac_se


def test_constant_series():
    t = newey_west_mean(np.full(19, 0.004))
    assert t.mean == 0.004 and t.hac_se == 0.0 and t.t_stat == math.inf and t.degenerate
    assert newey_west_mean(np.full(5, -0.01)).t_stat == -math.inf


def test_bartlett_weights_explicit():
    x = np.random.default_rng(4).standard_normal(30)
    d = x - x.mean()
    g = [d[j:] @ d[: len(d) - j] / 30 for j in range(4)]
    expected = g[0] + 2 * (0.75 * g[1] + 0.5 * g[2] + 0.25 * g[3])
    assert long_run_variance(x, 3) == pytest.approx(expected, rel=1e-13)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.integers(8, 50), elements=st.floats(-1, 1)), st.floats(-5, 5), st.floats(0.01, 100))
def test_omega_shift_and_scale(x, a, c):
    if np.ptp(x) < 1e-6:
        return
    L = min(3, len(x) - 1)
    base = long_run_variance(x, L)
    assert long_run_variance(x + a, L) == pytest.approx(base, rel=1e-8, abs=1e-12)
    assert long_run_variance(c * x, L) == pytest.approx(c * c * base, rel=1e-10, abs=1e-14)
    t1 = newey_west_mean(x, L).t_stat
    t2 = newey_west_mean(c * x, L).t_stat
    assert t2 == pytest.approx(t1, rel=1e-9, abs=1e-12)


def test_stars_thresholds():
    assert stars(4.26) == "***"
    assert stars(0.0) == ""
    assert stars(-2.0) == "**"
    assert stars(1.7) == "*" and stars(1.6449) == "" and stars(-2.576) == "***"


def test_ols_exact_fit():
    rng = np.random.default_rng(5)
    X = np.column_stack([np.ones(50), rng.standard_normal((50, 3))])
    b = np.array([0.3, -1.0, 2.0, 0.5])
    res = ols(X @ b, X)
    assert np.max(np.abs(res.coefficients - b)) <= 1e-10
    assert res.r_squared == 1.0


def test_ols_orthogonal_regressor():
    y = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    z = np.array([1.0, -1.0, 0.0, 0.0, -1.0, 1.0])  # orthogonal to 1 and to y
    assert z @ y == 0 and z.sum() == 0
    res = ols(y, np.column_stack([np.ones(6), z]))
    assert abs(res.coefficients[1]) <= 1e-14
    assert res.coefficients[0] == pytest.approx(y.mean(), abs=1e-14)


def test_ols_extended_precision_oracle():
    rng = np.random.default_rng(6)
    X = np.column_stack([np.ones(200), rng.standard_normal((200, 3))])
    y = X @ np.array([0.1, 1.0, -0.5, 2.0]) + rng.standard_normal(200)
    mpmath.mp.dps = 50
    Xm, ym = mpmath.matrix(X.tolist()), mpmath.matrix(y.tolist())
    ref = np.array([float(v) for v in mpmath.lu_solve(Xm.T * Xm, Xm.T * ym)])
    res = ols(y, X)
    assert np.max(np.abs(res.coefficients - ref)) <= 1e-9
    assert np.allclose(res.covariance, res.covariance.T, atol=1e-12)
    assert np.all(np.abs(res.t_stats - res.coefficients / res.std_errors) <= 1e-12)


def test_rank_deficient():
    X = np.column_stack([np.ones(10), np.arange(10.0), 2 * np.arange(10.0)])
    with pytest.raises(RankDeficient):
        ols(np.arange(10.0), X)
    with pytest.raises(RankDeficient):
        ols(np.ones(2), np.ones((2, 2)))


def test_white_constant_abs_residual():
    rng = np.random.default_rng(7)
    X = np.column_stack([np.ones(40), rng.standard_normal((40, 2))])
    e = 0.3 * rng.choice([-1.0, 1.0], 40)
    assert np.allclose(white_cov(X, e), 0.09 * np.linalg.inv(X.T @ X), rtol=1e-12, atol=1e-15)
    assert np.all(white_cov(X, np.zeros(40)) == 0.0)


def test_white_triple_product_oracle():
    rng = np.random.default_rng(8)
    n = 60
    X = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
    y = X @ [1.0, 0.5, -0.2] + rng.standard_normal(n) * (0.1 + np.abs(X[:, 1]))
    res = ols(y, X, se_type="white")
    A = np.linalg.inv(X.T @ X)
    meat = sum(res.residuals[i] ** 2 * np.outer(X[i], X[i]) for i in range(n))
    ref = A @ meat @ A
    assert np.max(np.abs(res.covariance - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))
    assert np.allclose(white_se(y, X), ref, atol=1e-14)
    assert np.min(np.linalg.eigvalsh(res.covariance)) >= -1e-10 * np.trace(res.covariance)


def test_r_squared_bounds_and_degenerate():
    X = np.column_stack([np.ones(5), np.arange(5.0)])
    res = ols(np.full(5, 2.0), X)
    assert res.r_squared == 0.0


def test_lag_bounds():
    with pytest.raises(ValueError):
        newey_west_mean(np.arange(5.0), lag=5)
    with pytest.raises(SeriesTooShort):
        newey_west_mean(np.array([1.0]))
    assert newey_west_mean(np.arange(5.0) ** 2).lag == 0  # auto falls back to 0 below 8 obs


def test_andrews_deterministic():
    x = np.random.default_rng(9).standard_normal(100)
    assert andrews_lag(x.copy()) == andrews_lag(x)
