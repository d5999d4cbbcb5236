"""Risk-neutral variance (SVIX) from option prices and option-implied expected returns.

The integral of out-of-the-money put and call prices over strike is
evaluated with the composite trapezoid rule on the quoted grid, with the
forward inserted as a node. Outside the grid:

* below the lowest strike the put price is taken linear down to zero at K = 0;
* above the highest strike the call price follows the lognormal model at the
  implied volatility of the last quote, and that tail is integrated in closed
  form out to infinity.

Both tail pieces are reported so their weight in the total can be audited.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import brentq
from scipy.special import ndtr

from .errors import (
    ArbitrageViolation,
    DataError,
    GridTooNarrow,
    MaturityMismatch,
    MissingColumn,
    NegativePrice,
    WeightMismatch,
)

MATURITIES = (30, 91, 182, 365, 730)
DAYS_PER_YEAR = 365.0
MONOTONE_TOL = 1e-8
PARITY_TOL = 1e-6
SURFACE_COLUMNS = ("date", "underlying_id", "days", "spot", "forward", "rf_gross", "strike", "call", "put")
MARKET_ID = "MARKET"


def black_prices(forward, strikes, rf_gross, sigma, years):
    """Lognormal (Black) call and put prices discounted by ``rf_gross``."""
    K = np.asarray(strikes, dtype=float)
    v = sigma * math.sqrt(years)
    if v <= 0:
        call = np.maximum(forward - K, 0.0) / rf_gross
        put = np.maximum(K - forward, 0.0) / rf_gross
        return call, put
    with np.errstate(divide="ignore"):
        d1 = (np.log(forward / K) + 0.5 * v * v) / v
    d2 = d1 - v
    call = (forward * ndtr(d1) - K * ndtr(d2)) / rf_gross
    put = (K * ndtr(-d2) - forward * ndtr(-d1)) / rf_gross
    return np.maximum(call, 0.0), np.maximum(put, 0.0)


def implied_vol_call(price, forward, strike, rf_gross, years) -> float:
    """Black implied volatility of a call; NaN when the price carries no time value."""
    intrinsic = max(forward - strike, 0.0) / rf_gross
    if price <= intrinsic or price <= 0.0:
        return math.nan

    def f(s):
        return black_prices(forward, [strike], rf_gross, s, years)[0][0] - price

    hi = 5.0
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e3:
            return math.nan
    return brentq(f, 1e-9, hi, xtol=1e-15, rtol=1e-14, maxiter=500)


def upper_tail_integral(forward, strike, rf_gross, sigma, years) -> float:
    """Closed-form integral of lognormal call prices over [strike, inf).

    Uses  int_a^inf C(K) dK = E[((S - a)^+)^2] / (2 R)  for S lognormal with
    mean ``forward`` and log-volatility sigma * sqrt(years).
    """
    v = sigma * math.sqrt(years)
    if not v > 0:
        return 0.0
    a = strike
    d1 = (math.log(forward / a) + 0.5 * v * v) / v
    d2 = d1 - v
    second = forward**2 * math.exp(v * v) * ndtr(d1 + v)
    first = forward * ndtr(d1)
    prob = ndtr(d2)
    value = second - 2.0 * a * first + a * a * prob
    return max(value, 0.0) / (2.0 * rf_gross)


@dataclass(frozen=True)
class OptionSurfaceSlice:
    """One underlying, date and maturity: call and put prices on a strike grid."""

    underlying_id: str
    date: date
    maturity_days: int
    spot: float
    forward: float
    rf_gross: float
    strikes: np.ndarray
    call_prices: np.ndarray
    put_prices: np.ndarray
    parity_tol: float = PARITY_TOL

    def __post_init__(self):
        K = np.asarray(self.strikes, dtype=float)
        C = np.asarray(self.call_prices, dtype=float)
        P = np.asarray(self.put_prices, dtype=float)
        if not (K.shape == C.shape == P.shape) or K.ndim != 1 or K.size < 2:
            raise DataError(f"{self.underlying_id}: strike and price arrays must be aligned 1-d arrays")
        if not (np.isfinite(K).all() and np.isfinite(C).all() and np.isfinite(P).all()):
            raise DataError(f"{self.underlying_id}: non-finite strike or price")
        if (K <= 0).any() or (np.diff(K) <= 0).any():
            raise DataError(f"{self.underlying_id}: strikes must be positive and strictly increasing")
        if self.spot <= 0 or self.forward <= 0 or self.rf_gross <= 0:
            raise DataError(f"{self.underlying_id}: spot, forward and rf_gross must be positive")
        if (C < 0).any() or (P < 0).any():
            bad = K[(C < 0) | (P < 0)][0]
            raise NegativePrice(f"{self.underlying_id} {self.date}: negative option price at strike {bad}")
        tol = MONOTONE_TOL * self.spot
        call_up = np.where(np.diff(C) > tol)[0]
        put_down = np.where(np.diff(P) < -tol)[0]
        if call_up.size or put_down.size:
            where = [f"call rises at K={K[i + 1]:g}" for i in call_up[:3]] + [f"put falls at K={K[i + 1]:g}" for i in put_down[:3]]
            raise ArbitrageViolation(f"{self.underlying_id} {self.date}: " + "; ".join(where))
        gap = np.abs(C - P - (self.forward - K) / self.rf_gross)
        if (gap > self.parity_tol * self.spot).any():
            i = int(np.argmax(gap))
            raise ArbitrageViolation(
                f"{self.underlying_id} {self.date}: put-call parity off by {gap[i]:.3g} at K={K[i]:g}"
            )
        object.__setattr__(self, "strikes", K)
        object.__setattr__(self, "call_prices", C)
        object.__setattr__(self, "put_prices", P)
        object.__setattr__(self, "maturity_days", int(self.maturity_days))

    @property
    def years(self) -> float:
        return self.maturity_days / DAYS_PER_YEAR


def slice_from_vols(underlying_id, day, maturity_days, spot, forward, rf_gross, strikes, vols) -> OptionSurfaceSlice:
    """Convert an implied-vol smile into a price slice with the lognormal formula."""
    K = np.asarray(strikes, dtype=float)
    vols = np.broadcast_to(np.asarray(vols, dtype=float), K.shape)
    years = maturity_days / DAYS_PER_YEAR
    calls, puts = np.empty_like(K), np.empty_like(K)
    for i, (k, s) in enumerate(zip(K, vols)):
        c, p = black_prices(forward, [k], rf_gross, float(s), years)
        calls[i], puts[i] = c[0], p[0]
    return OptionSurfaceSlice(underlying_id, day, maturity_days, spot, forward, rf_gross, K, calls, puts)


@dataclass(frozen=True)
class SvixValue:
    underlying_id: str
    date: date
    maturity_days: int
    svix2_raw: float
    tail_share: float = 0.0
    components: Mapping[str, float] = field(default_factory=dict)
    rf_gross: float = 1.0

    @property
    def svix2_annualized(self) -> float:
        return self.svix2_raw * DAYS_PER_YEAR / self.maturity_days


def svix_squared(sl: OptionSurfaceSlice) -> SvixValue:
    """SVIX^2 = 2 / (R_f S^2) * [int_0^F put dK + int_F^inf call dK]."""
    K, C, P = sl.strikes, sl.call_prices, sl.put_prices
    F = sl.forward
    if K[0] > 0.5 * F or K[-1] < 2.0 * F:
        raise GridTooNarrow(
            f"{sl.underlying_id} {sl.date} {sl.maturity_days}d: strikes [{K[0]:g}, {K[-1]:g}] must span [0.5F, 2F] with F={F:g}"
        )
    at_f = np.searchsorted(K, F)
    if at_f < K.size and K[at_f] == F:
        q_f = 0.5 * (C[at_f] + P[at_f])
    else:
        lo, hi = at_f - 1, at_f
        t = (F - K[lo]) / (K[hi] - K[lo])
        c_f = C[lo] + t * (C[hi] - C[lo])
        p_f = P[lo] + t * (P[hi] - P[lo])
        q_f = 0.5 * (c_f + p_f)
    below = K < F
    above = K > F
    k_put = np.append(K[below], F)
    v_put = np.append(P[below], q_f)
    k_call = np.insert(K[above], 0, F)
    v_call = np.insert(C[above], 0, q_f)
    put_body = float(np.trapezoid(v_put, k_put))
    call_body = float(np.trapezoid(v_call, k_call))
    lower_tail = 0.5 * K[0] * P[0]
    sigma_top = implied_vol_call(C[-1], F, K[-1], sl.rf_gross, sl.years)
    upper_tail = 0.0 if math.isnan(sigma_top) else upper_tail_integral(F, K[-1], sl.rf_gross, sigma_top, sl.years)
    total = put_body + call_body + lower_tail + upper_tail
    scale = 2.0 / (sl.rf_gross * sl.spot**2)
    svix2 = scale * total
    tail_share = (lower_tail + upper_tail) / total if total > 0 else 0.0
    return SvixValue(
        sl.underlying_id,
        sl.date,
        sl.maturity_days,
        svix2,
        tail_share,
        {
            "put_body": scale * put_body,
            "call_body": scale * call_body,
            "lower_tail": scale * lower_tail,
            "upper_tail": scale * upper_tail,
        },
        sl.rf_gross,
    )


def _check_aligned(values: Sequence[SvixValue]) -> None:
    keys = {(v.date, v.maturity_days) for v in values}
    if len(keys) > 1:
        raise MaturityMismatch(f"values span several (date, maturity) pairs: {sorted(keys)}")


def svix_bar(values: Sequence[SvixValue], weights: Sequence[float], label: str = "SVIX_BAR") -> SvixValue:
    """Weighted average stock SVIX^2; weights must be positive and sum to one."""
    values = list(values)
    w = np.asarray(weights, dtype=float)
    if not values or w.shape != (len(values),):
        raise WeightMismatch(f"{len(values)} values but {w.size} weights")
    if (w <= 0).any() or abs(w.sum() - 1.0) > 1e-12:
        raise WeightMismatch(f"weights must be positive and sum to 1 (sum={w.sum()!r})")
    _check_aligned(values)
    s = np.array([v.svix2_raw for v in values])
    return SvixValue(label, values[0].date, values[0].maturity_days, float(w @ s), rf_gross=values[0].rf_gross)


@dataclass(frozen=True)
class ExpectedReturn:
    underlying_id: str
    date: date
    maturity_days: int
    premium_over_rf: float  # (E R_i - R_f) / R_f over the option horizon
    rf_gross: float

    @property
    def premium(self) -> float:
        """E R_i - R_f over the horizon."""
        return self.rf_gross * self.premium_over_rf

    @property
    def premium_annualized(self) -> float:
        return self.premium_over_rf * DAYS_PER_YEAR / self.maturity_days


def expected_return(stock: SvixValue, market: SvixValue, bar: SvixValue, rf_gross: float) -> ExpectedReturn:
    """Stock premium: market SVIX^2 plus half the stock's SVIX^2 in excess of the average."""
    _check_aligned([stock, market, bar])
    ratio = market.svix2_raw + 0.5 * (stock.svix2_raw - bar.svix2_raw)
    return ExpectedReturn(stock.underlying_id, stock.date, stock.maturity_days, ratio, rf_gross)


# ---------------------------------------------------------------------------
# files


def load_surface(path: str | Path) -> list[OptionSurfaceSlice]:
    frame = pd.read_csv(path, dtype={"underlying_id": str, "date": str}, float_precision="round_trip")
    missing = [c for c in SURFACE_COLUMNS if c not in frame.columns]
    if missing:
        raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")
    slices = []
    for (day, uid, days), g in frame.groupby(["date", "underlying_id", "days"], sort=True):
        g = g.sort_values("strike")
        head = g.iloc[0]
        for col in ("spot", "forward", "rf_gross"):
            if g[col].nunique() != 1:
                raise DataError(f"{uid} {day} {days}d: {col} varies within a slice")
        slices.append(
            OptionSurfaceSlice(
                uid, date.fromisoformat(day), int(days), float(head.spot), float(head.forward),
                float(head.rf_gross), g["strike"].to_numpy(), g["call"].to_numpy(), g["put"].to_numpy(),
            )
        )
    return slices


def write_surface(slices: Iterable[OptionSurfaceSlice], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SURFACE_COLUMNS)
        for sl in slices:
            for k, c, p in zip(sl.strikes, sl.call_prices, sl.put_prices):
                w.writerow([sl.date.isoformat(), sl.underlying_id, sl.maturity_days, repr(sl.spot),
                            repr(sl.forward), repr(sl.rf_gross), repr(float(k)), repr(float(c)), repr(float(p))])


def svix_frame(values: Iterable[SvixValue]) -> pd.DataFrame:
    rows = [
        {
            "date": pd.Timestamp(v.date),
            "underlying_id": v.underlying_id,
            "days": v.maturity_days,
            "svix2_raw": v.svix2_raw,
            "svix2_pa": v.svix2_annualized,
            "tail_share": v.tail_share,
            "rf_gross": v.rf_gross,
        }
        for v in values
    ]
    cols = ["date", "underlying_id", "days", "svix2_raw", "svix2_pa", "tail_share", "rf_gross"]
    return pd.DataFrame(rows, columns=cols).sort_values(["date", "underlying_id", "days"], kind="mergesort").reset_index(drop=True)


# ---------------------------------------------------------------------------
# resilience indices


def resilience_svix_indices(svix: pd.DataFrame, matched, tie_rule: str = "high") -> pd.DataFrame:
    """Value-weighted SVIX^2 of High and Low resilience firms, per date and maturity.

    ``svix`` has columns date, underlying_id, days, svix2_raw (see
    :func:`svix_frame`); ``matched`` supplies industry values and market caps.
    Weights are the previous trading date's caps, as for return portfolios.
    Output columns: date, days, high, low, low_minus_high and their ``_pa``
    annualized twins.
    """
    from .portfolios import HIGH, LOW, build_portfolio_series

    out = []
    tidy = svix.rename(columns={"underlying_id": "firm_id"})
    for days, g in tidy.groupby("days", sort=True):
        series = build_portfolio_series(matched, g[["date", "firm_id", "svix2_raw"]], column="svix2_raw", tie_rule=tie_rule)
        hi, lo = series[HIGH], series[LOW]
        frame = pd.DataFrame(
            {
                "date": hi.dates,
                "days": int(days),
                "high": hi.daily_return,
                "low": lo.daily_return,
                "n_high": hi.constituents_count,
                "n_low": lo.constituents_count,
            }
        )
        frame["low_minus_high"] = frame["low"] - frame["high"]
        for col in ("high", "low", "low_minus_high"):
            frame[f"{col}_pa"] = frame[col] * DAYS_PER_YEAR / days
        out.append(frame)
    if not out:
        return pd.DataFrame(columns=["date", "days", "high", "low", "n_high", "n_low", "low_minus_high"])
    return pd.concat(out, ignore_index=True).sort_values(["date", "days"], kind="mergesort").reset_index(drop=True)


def expected_returns_table(
    svix: pd.DataFrame, caps: pd.DataFrame, market_id: str = MARKET_ID, ids: Sequence[str] | None = None
) -> pd.DataFrame:
    """Option-implied premia for every stock (or ``ids``) on each date and maturity.

    ``svix`` is a :func:`svix_frame`; ``caps`` is a long frame with date,
    firm_id, mktcap. The average-stock index weights every stock that has a
    SVIX value and a previous-day cap on that date.
    """
    from .portfolios import lagged_caps

    wcaps = lagged_caps(caps[["date", "firm_id", "mktcap"]]).set_index(["date", "firm_id"])["wcap"]
    rows = []
    for (day, days), g in svix.groupby(["date", "days"], sort=True):
        mkt = g.loc[g["underlying_id"] == market_id]
        if mkt.empty:
            continue
        stocks = g.loc[g["underlying_id"] != market_id]
        keys = pd.MultiIndex.from_arrays([stocks["date"], stocks["underlying_id"]])
        w = wcaps.reindex(keys).to_numpy(dtype=float)
        ok = np.isfinite(w)
        if not ok.any():
            continue
        stocks = stocks.loc[ok]
        w = w[ok] / w[ok].sum()
        vals = [SvixValue(r.underlying_id, r.date.date(), int(days), r.svix2_raw, rf_gross=r.rf_gross) for r in stocks.itertuples()]
        bar = svix_bar(vals, w)
        m = mkt.iloc[0]
        market = SvixValue(market_id, m["date"].date(), int(days), float(m["svix2_raw"]), rf_gross=float(m["rf_gross"]))
        for v, wi in zip(vals, w):
            if ids and v.underlying_id not in ids:
                continue
            er = expected_return(v, market, bar, market.rf_gross)
            rows.append(
                {"date": pd.Timestamp(day), "underlying_id": v.underlying_id, "days": int(days),
                 "svix2_stock": v.svix2_raw, "svix2_market": market.svix2_raw, "svix2_bar": bar.svix2_raw,
                 "weight": float(wi), "premium_over_rf": er.premium_over_rf,
                 "premium_pa": er.premium_annualized}
            )
    cols = ["date", "underlying_id", "days", "svix2_stock", "svix2_market", "svix2_bar", "weight", "premium_over_rf", "premium_pa"]
    return pd.DataFrame(rows, columns=cols)
