"""OLS, White and Newey-West covariance estimators, and significance stars."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RankDeficient, SeriesTooShort

RANK_TOL = 1e-12
ANDREWS_BARTLETT_CONSTANT = 1.1447
RHO_CLAMP = 0.97
STAR_THRESHOLDS = ((2.576, "***"), (1.960, "**"), (1.645, "*"))


def stars(t: float, thresholds=STAR_THRESHOLDS) -> str:
    """Two-sided significance stars for a t-statistic (10/5/1% normal cutoffs)."""
    if t is None or math.isnan(t):
        return ""
    a = abs(t)
    for cut, mark in thresholds:
        if a >= cut:
            return mark
    return ""


@dataclass(frozen=True)
class RegressionResult:
    coefficients: np.ndarray
    covariance: np.ndarray
    se_type: str
    n_obs: int
    r_squared: float
    residuals: np.ndarray

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def t_stats(self) -> np.ndarray:
        se = self.std_errors
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(se > 0, self.coefficients / se, np.nan)

    @property
    def stars(self) -> list[str]:
        return [stars(t) for t in self.t_stats]


def _check_rank(X: np.ndarray) -> None:
    sv = np.linalg.svd(X, compute_uv=False)
    if sv.size == 0 or sv[0] == 0 or sv[-1] <= RANK_TOL * sv[0]:
        raise RankDeficient(f"design matrix rank deficient (singular values {sv[0]:.3g}..{sv[-1]:.3g})")


def lstsq_qr(y: np.ndarray, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares coefficients via Householder QR, plus R for the covariance."""
    q, r = np.linalg.qr(X, mode="reduced")
    beta = np.linalg.solve(r, q.T @ y)
    return beta, r


def ols(y, X, se_type: str = "ols") -> RegressionResult:
    """Ordinary least squares with an orthogonal-decomposition solve.

    Parameters
    ----------
    y : array_like, shape (n,)
    X : array_like, shape (n, k)
        Design matrix; include the intercept column yourself.
    se_type : {"ols", "white"}
        Classical or HC0 covariance.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if n <= k:
        raise RankDeficient(f"need more rows than columns, got {n}x{k}")
    _check_rank(X)
    beta, r = lstsq_qr(y, X)
    resid = y - X @ beta
    r_inv = np.linalg.inv(r)
    xtx_inv = r_inv @ r_inv.T
    if se_type == "ols":
        sigma2 = resid @ resid / (n - k)
        cov = sigma2 * xtx_inv
    elif se_type == "white":
        cov = white_cov(X, resid, xtx_inv)
    else:
        raise ValueError(f"unknown se_type {se_type!r}")
    cov = 0.5 * (cov + cov.T)
    sst = np.sum((y - y.mean()) ** 2)
    ssr = resid @ resid
    r2 = 0.0 if sst == 0 else float(min(max(1.0 - ssr / sst, 0.0), 1.0))
    return RegressionResult(beta, cov, se_type, n, r2, resid)


def white_cov(X, residuals, xtx_inv=None) -> np.ndarray:
    """HC0 sandwich (X'X)^-1 (sum e_i^2 x_i x_i') (X'X)^-1."""
    X = np.asarray(X, dtype=float)
    e = np.asarray(residuals, dtype=float)
    if xtx_inv is None:
        xtx_inv = np.linalg.inv(X.T @ X)
    meat = (X * (e**2)[:, None]).T @ X
    cov = xtx_inv @ meat @ xtx_inv
    return 0.5 * (cov + cov.T)


def white_se(y, X, residuals=None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if residuals is None:
        residuals = ols(y, X).residuals
    return white_cov(X, residuals)


def _autocov(d: np.ndarray, j: int) -> float:
    n = d.size
    if j == 0:
        return float(d @ d) / n
    return float(d[j:] @ d[:-j]) / n


def andrews_lag(series) -> int:
    """Andrews AR(1) plug-in truncation lag for the Bartlett kernel."""
    x = np.asarray(series, dtype=float)
    T = x.size
    if T < 8:
        raise SeriesTooShort(f"Andrews lag needs at least 8 observations, got {T}")
    d = x - x.mean()
    g0 = _autocov(d, 0)
    if g0 <= 0.0:
        return 0
    rho = _autocov(d, 1) / g0
    rho = min(max(rho, -RHO_CLAMP), RHO_CLAMP)
    alpha = 4.0 * rho**2 / ((1.0 - rho) ** 2 * (1.0 + rho) ** 2)
    bandwidth = ANDREWS_BARTLETT_CONSTANT * (alpha * T) ** (1.0 / 3.0)
    return int(min(max(math.floor(bandwidth), 0), T - 1))


def long_run_variance(series, lag: int) -> float:
    """Bartlett-weighted long-run variance with autocovariance divisor T."""
    x = np.asarray(series, dtype=float)
    d = x - x.mean()
    omega = _autocov(d, 0)
    for j in range(1, lag + 1):
        omega += 2.0 * (1.0 - j / (lag + 1.0)) * _autocov(d, j)
    return omega


@dataclass(frozen=True)
class HacMeanTest:
    mean: float
    hac_se: float
    lag: int
    t_stat: float
    n_obs: int
    degenerate: bool = False

    @property
    def stars(self) -> str:
        return stars(self.t_stat)


def newey_west_mean(series, lag: int | str = "auto") -> HacMeanTest:
    """Mean of a series with a Newey-West standard error.

    ``lag="auto"`` selects the Andrews plug-in lag (needs 8+ points). A
    constant series has zero standard error; its t-statistic is reported as
    signed infinity and ``degenerate`` is set.
    """
    x = np.asarray(series, dtype=float)
    T = x.size
    if T < 2:
        raise SeriesTooShort(f"need at least 2 observations, got {T}")
    if lag == "auto":
        lag = andrews_lag(x) if T >= 8 else 0
    lag = int(lag)
    if not 0 <= lag < T:
        raise ValueError(f"lag must lie in [0, {T - 1}], got {lag}")
    m = float(x.mean())
    if np.ptp(x) == 0.0:
        m = float(x[0])
        t = math.copysign(math.inf, m) if m != 0 else math.nan
        return HacMeanTest(m, 0.0, lag, t, T, degenerate=True)
    omega = long_run_variance(x, lag)
    se = math.sqrt(max(omega, 0.0) / T)
    if se == 0.0:
        t = math.copysign(math.inf, m) if m != 0 else math.nan
        return HacMeanTest(m, 0.0, lag, t, T, degenerate=True)
    return HacMeanTest(m, se, lag, m / se, T)
