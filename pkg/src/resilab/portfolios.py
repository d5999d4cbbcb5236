"""Daily median-split resilience portfolios and industry cross-sections.

Firms are re-sorted every day. A firm's "low-resilience score" is its
measure value, negated when higher values mean more resilience, so that one
rule covers both directions: score below the lower median goes to High,
above goes to Low, and ties at the median follow ``tie_rule``.

Portfolio weights use the previous trading date's market cap. On the first
date of a sample no earlier cap exists and the same-date cap is used; those
dates are listed in ``PortfolioSeries.same_day_weight_dates``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .data import AttentionSeries, MatchedPanel
from .errors import EmptyUniverse, InsufficientOverlap, MissingCap, RankDeficient, WindowOutOfRange
from .factors import AdjustedPanel
from .inference import HacMeanTest, RegressionResult, newey_west_mean, ols

HIGH, LOW, HML = "High", "Low", "HminusL"
TIE_RULES = ("high", "low")


def lower_median(values) -> float:
    """Order statistic floor((n+1)/2) of the sorted values."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("median of empty set")
    return float(v[(v.size + 1) // 2 - 1])


def _is_high(score: np.ndarray, median: np.ndarray | float, tie_rule: str) -> np.ndarray:
    if tie_rule == "high":
        return score <= median
    if tie_rule == "low":
        return score < median
    raise ValueError(f"tie_rule must be one of {TIE_RULES}")


def assign_portfolios(matched: MatchedPanel, date, tie_rule: str = "high") -> tuple[frozenset, frozenset]:
    """Split the firms present on ``date`` into (High, Low) resilience sets."""
    ts = pd.Timestamp(date)
    day = matched.frame.loc[matched.frame["date"] == ts, ["firm_id", "value"]]
    if len(day) < 2:
        raise EmptyUniverse(ts.date())
    score = matched.measure.low_resilience_score(day["value"].to_numpy(dtype=float))
    high = _is_high(score, lower_median(score), tie_rule)
    firms = day["firm_id"].to_numpy()
    return frozenset(firms[high]), frozenset(firms[~high])


def lagged_caps(frame: pd.DataFrame) -> pd.DataFrame:
    """Add ``wcap`` (previous trading date's cap) and ``same_day_cap`` to a long frame.

    Trading dates are the distinct dates in ``frame``. A firm absent on the
    previous date gets NaN, except on the first date where the same-date cap
    is used.
    """
    caps = frame.pivot(index="date", columns="firm_id", values="mktcap").sort_index()
    lag = caps.shift(1)
    first = caps.index[0]
    lag.loc[first] = caps.loc[first]
    stacked = lag.stack(future_stack=True).rename("wcap")
    out = frame.join(stacked, on=["date", "firm_id"])
    out["same_day_cap"] = out["date"] == first
    return out


def value_weighted_return(members, date, table: pd.DataFrame, return_field: str = "exret") -> float:
    """Cap-weighted return of ``members`` on ``date``.

    ``table`` is indexed by (date, firm_id) and carries ``wcap`` (the weighting
    cap, see :func:`lagged_caps`) and the requested return column.
    """
    ts = pd.Timestamp(date)
    members = sorted(members)
    if not members:
        raise EmptyUniverse(ts.date())
    caps, rets = [], []
    for firm in members:
        try:
            row = table.loc[(ts, firm)]
        except KeyError:
            raise MissingCap(firm, ts.date()) from None
        cap = row["wcap"]
        if not np.isfinite(cap):
            raise MissingCap(firm, ts.date())
        caps.append(cap)
        rets.append(row[return_field])
    w = np.asarray(caps, dtype=float)
    w = w / w.sum()
    return float(w @ np.asarray(rets, dtype=float))


@dataclass(frozen=True)
class PortfolioSeries:
    label: str
    dates: pd.DatetimeIndex
    daily_return: np.ndarray
    constituents_count: np.ndarray
    same_day_weight_dates: tuple = ()

    def to_series(self) -> pd.Series:
        return pd.Series(self.daily_return, index=self.dates, name=self.label)

    def window(self, start, end) -> "PortfolioSeries":
        mask = (self.dates >= pd.Timestamp(start)) & (self.dates <= pd.Timestamp(end))
        return PortfolioSeries(
            self.label, self.dates[mask], self.daily_return[mask], self.constituents_count[mask],
            tuple(d for d in self.same_day_weight_dates if pd.Timestamp(start) <= d <= pd.Timestamp(end)),
        )


def _returns_frame(matched: MatchedPanel, returns: pd.DataFrame | AdjustedPanel | None, column: str) -> pd.DataFrame:
    base = lagged_caps(matched.frame[["date", "firm_id", "value", "mktcap", "exret"]])
    if returns is None:
        base["r"] = base[column]
    else:
        frame = returns.frame if isinstance(returns, AdjustedPanel) else returns
        base = base.merge(frame[["date", "firm_id", column]].rename(columns={column: "r"}), on=["date", "firm_id"], how="inner")
    return base


def portfolio_weights(
    matched: MatchedPanel,
    returns: pd.DataFrame | AdjustedPanel | None = None,
    column: str = "exret",
    tie_rule: str = "high",
    dates: Sequence | None = None,
) -> pd.DataFrame:
    """Per-date constituents with their group label and normalized weight.

    Columns: date, firm_id, group, weight, r, same_day_cap. Firms lacking a
    weighting cap or the requested return on a date are left out of that
    date's universe; dates with an empty group are dropped.
    """
    df = _returns_frame(matched, returns, "adj" if isinstance(returns, AdjustedPanel) else column)
    if dates is not None:
        df = df.loc[df["date"].isin(pd.DatetimeIndex(dates))]
    df = df.loc[np.isfinite(df["wcap"]) & np.isfinite(df["r"])].copy()
    df["score"] = matched.measure.low_resilience_score(df["value"].to_numpy(dtype=float))
    med = df.groupby("date")["score"].transform(lower_median)
    df["group"] = np.where(_is_high(df["score"].to_numpy(), med.to_numpy(), tie_rule), HIGH, LOW)
    counts = df.groupby(["date", "group"]).size().unstack(fill_value=0).reindex(columns=[HIGH, LOW], fill_value=0)
    ok = counts.index[(counts[HIGH] > 0) & (counts[LOW] > 0)]
    df = df.loc[df["date"].isin(ok)]
    df["weight"] = df["wcap"] / df.groupby(["date", "group"])["wcap"].transform("sum")
    return df[["date", "firm_id", "group", "weight", "r", "same_day_cap"]].sort_values(
        ["date", "group", "firm_id"], kind="mergesort"
    ).reset_index(drop=True)


def build_portfolio_series(
    matched: MatchedPanel,
    returns: pd.DataFrame | AdjustedPanel | None = None,
    column: str = "exret",
    tie_rule: str = "high",
    dates: Sequence | None = None,
) -> dict[str, PortfolioSeries]:
    """Daily value-weighted High, Low and High-minus-Low series.

    With ``returns=None`` the matched panel's excess returns are used; pass an
    AdjustedPanel for risk-adjusted series.
    """
    w = portfolio_weights(matched, returns, column, tie_rule, dates)
    w["wr"] = w["weight"] * w["r"]
    g = w.groupby(["date", "group"])
    ret = g["wr"].sum().unstack().reindex(columns=[HIGH, LOW])
    cnt = g.size().unstack().reindex(columns=[HIGH, LOW])
    idx = pd.DatetimeIndex(ret.index)
    same = tuple(sorted(set(w.loc[w["same_day_cap"], "date"])))
    hi = ret[HIGH].to_numpy()
    lo = ret[LOW].to_numpy()
    return {
        HIGH: PortfolioSeries(HIGH, idx, hi, cnt[HIGH].to_numpy(dtype=int), same),
        LOW: PortfolioSeries(LOW, idx, lo, cnt[LOW].to_numpy(dtype=int), same),
        HML: PortfolioSeries(HML, idx, hi - lo, (cnt[HIGH] + cnt[LOW]).to_numpy(dtype=int), same),
    }


def cumulative_series(daily: PortfolioSeries | pd.Series, mode: str = "arithmetic_sum") -> pd.Series:
    """Cumulative return in percent: running sum or compounded product."""
    s = daily.to_series() if isinstance(daily, PortfolioSeries) else daily
    r = s.to_numpy(dtype=float)
    if mode == "arithmetic_sum":
        c = np.cumsum(r)
    elif mode == "geometric_compound":
        c = np.cumprod(1.0 + r) - 1.0
    else:
        raise ValueError(f"unknown cumulation mode {mode!r}")
    return pd.Series(100.0 * c, index=s.index, name=s.name)


def event_window_stats(series: PortfolioSeries, start, end, lag="auto") -> HacMeanTest:
    """Mean daily return over [start, end] with a Newey-West t-statistic."""
    start, end = pd.Timestamp(start), pd.Timestamp(end)
    if len(series.dates) == 0 or start < series.dates[0] or end > series.dates[-1] or end < start:
        raise WindowOutOfRange(f"window {start.date()}..{end.date()} not inside series dates")
    sub = series.window(start, end)
    return newey_west_mean(sub.daily_return, lag=lag)


# ---------------------------------------------------------------------------
# industries


@dataclass(frozen=True)
class IndustryPortfolio:
    naics: str
    description: str
    n_firms: int
    resilience: float
    cumulative_adjusted_return: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class IndustryCrossSection:
    rows: list[IndustryPortfolio]
    regression_input: pd.DataFrame  # naics, resilience, one cum_<model> column per model

    def regress(self, model: str) -> RegressionResult:
        """Cross-sectional OLS of cumulative return (percent) on resilience, White covariance."""
        d = self.regression_input
        X = np.column_stack([np.ones(len(d)), d["resilience"].to_numpy(dtype=float)])
        return ols(d[f"cum_{model}"].to_numpy(dtype=float), X, se_type="white")


def industry_cross_section(
    matched: MatchedPanel,
    adjusted: Mapping[str, AdjustedPanel],
    window,
    top_n_industries: int = 25,
    mode: str = "arithmetic_sum",
    descriptions: Mapping[str, str] | None = None,
) -> IndustryCrossSection:
    """Value-weighted cumulative adjusted returns of the largest industries.

    Industries are ranked by distinct firm count inside the window (ties by
    code). Cumulative returns are in percent.
    """
    start, end = pd.Timestamp(window[0]), pd.Timestamp(window[1])
    in_win = matched.frame.loc[(matched.frame["date"] >= start) & (matched.frame["date"] <= end)]
    counts = in_win.groupby("industry")["firm_id"].nunique()
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n_industries]
    descriptions = descriptions or {}
    caps = lagged_caps(matched.frame[["date", "firm_id", "industry", "mktcap"]])
    caps = caps.loc[(caps["date"] >= start) & (caps["date"] <= end)]

    cum: dict[str, dict[str, float]] = {code: {} for code, _ in ranked}
    for name, adj in adjusted.items():
        df = caps.merge(adj.frame[["date", "firm_id", "adj"]], on=["date", "firm_id"], how="inner")
        df = df.loc[np.isfinite(df["wcap"])]
        df["weight"] = df["wcap"] / df.groupby(["date", "industry"])["wcap"].transform("sum")
        df["wr"] = df["weight"] * df["adj"]
        daily = df.groupby(["industry", "date"])["wr"].sum()
        for code, _ in ranked:
            series = daily.loc[code] if code in daily.index.get_level_values(0) else pd.Series(dtype=float)
            c = cumulative_series(series, mode)
            cum[code][name] = float(c.iloc[-1]) if len(c) else float("nan")

    rows, records = [], []
    for code, n in ranked:
        res = matched.measure.resilience(matched.measure.entries[code])
        rows.append(IndustryPortfolio(code, descriptions.get(code, ""), int(n), res, cum[code]))
        records.append({"naics": code, "n_firms": int(n), "resilience": res, **{f"cum_{m}": v for m, v in cum[code].items()}})
    return IndustryCrossSection(rows, pd.DataFrame.from_records(records))


# ---------------------------------------------------------------------------
# attention


@dataclass(frozen=True)
class AttentionFit:
    slope: float
    intercept: float
    r_squared: float
    n_obs: int


def attention_regression(hl: PortfolioSeries, attention: AttentionSeries, min_overlap: int = 10) -> AttentionFit:
    """OLS of daily High-minus-Low returns on the first difference of attention."""
    d_att = attention.values.diff().dropna()
    y = hl.to_series()
    common = y.index.intersection(d_att.index)
    if len(common) < min_overlap:
        raise InsufficientOverlap(f"only {len(common)} overlapping dates, need {min_overlap}")
    yv = y.loc[common].to_numpy(dtype=float)
    xv = d_att.loc[common].to_numpy(dtype=float)
    if np.ptp(xv) == 0.0:
        return AttentionFit(0.0, float(yv.mean()), 0.0, len(common))
    try:
        res = ols(yv, np.column_stack([np.ones(len(common)), xv]))
    except RankDeficient:
        return AttentionFit(0.0, float(yv.mean()), 0.0, len(common))
    return AttentionFit(float(res.coefficients[1]), float(res.coefficients[0]), res.r_squared, len(common))
