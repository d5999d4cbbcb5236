"""Stage composition shared by the CLI and the acceptance harness."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from typing import Mapping, Sequence

import pandas as pd

from .data import FactorSeries, MatchedPanel, ResilienceMeasure, ReturnPanel, apply_universe_filter, match_resilience
from .factors import MIN_OBS, AdjustedPanel, adjust_returns, estimate_exposures, get_model
from .inference import HacMeanTest
from .portfolios import HIGH, HML, LOW, PortfolioSeries, build_portfolio_series, event_window_stats, industry_cross_section

EVENT_WINDOW = (date(2020, 2, 24), date(2020, 3, 20))
ESTIMATION_WINDOW = (date(2019, 1, 1), date(2019, 12, 31))
APPLICATION_PERIOD = (date(2020, 1, 1), date(2020, 3, 31))
ALL_MODELS = ("capm", "ff3", "ff4", "ff5", "ff6")
ROWS = (HIGH, LOW, HML)


def prepare(panel: ReturnPanel, measure: ResilienceMeasure, min_cap: float = 10.0) -> MatchedPanel:
    return match_resilience(apply_universe_filter(panel, min_cap), measure)


def adjusted_panels(
    matched: MatchedPanel,
    factors: FactorSeries,
    models: Sequence[str],
    estimation_window=ESTIMATION_WINDOW,
    period=APPLICATION_PERIOD,
    min_obs: int = MIN_OBS,
) -> dict[str, AdjustedPanel]:
    out = {}
    for name in models:
        est = estimate_exposures(matched, factors, get_model(name), estimation_window, min_obs)
        out[name.lower()] = adjust_returns(matched, est, factors, period)
    return out


@dataclass(frozen=True)
class EventStudy:
    columns: tuple[str, ...]
    cells: Mapping[tuple[str, str], HacMeanTest]  # (row, column) -> test
    series: Mapping[str, Mapping[str, PortfolioSeries]]  # column -> label -> series


def event_study(
    matched: MatchedPanel,
    factors: FactorSeries,
    models: Sequence[str] = ALL_MODELS,
    window=EVENT_WINDOW,
    estimation_window=ESTIMATION_WINDOW,
    period=APPLICATION_PERIOD,
    tie_rule: str = "high",
    min_obs: int = MIN_OBS,
    include_raw: bool = True,
) -> EventStudy:
    """High/Low/High-minus-Low window means for raw excess and each adjusted return."""
    start, end = pd.Timestamp(period[0]), pd.Timestamp(period[1])
    columns, series = [], {}
    if include_raw:
        dates = matched.dates[(matched.dates >= start) & (matched.dates <= end)]
        series["ret"] = build_portfolio_series(matched, tie_rule=tie_rule, dates=dates)
        columns.append("ret")
    for name, adj in adjusted_panels(matched, factors, models, estimation_window, period, min_obs).items():
        series[name] = build_portfolio_series(matched, adj, tie_rule=tie_rule)
        columns.append(name)
    cells = {}
    for col in columns:
        for row in ROWS:
            cells[(row, col)] = event_window_stats(series[col][row], *window)
    return EventStudy(tuple(columns), cells, series)


def industry_xs(
    matched: MatchedPanel,
    factors: FactorSeries,
    models: Sequence[str] = ("capm", "ff3", "ff5"),
    window=EVENT_WINDOW,
    estimation_window=ESTIMATION_WINDOW,
    top_n: int = 25,
    min_obs: int = MIN_OBS,
    descriptions=None,
    mode: str = "arithmetic_sum",
):
    adjusted = adjusted_panels(matched, factors, models, estimation_window, window, min_obs)
    return industry_cross_section(matched, adjusted, window, top_n, mode, descriptions)
