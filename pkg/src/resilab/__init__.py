"""Resilience-sorted stock returns around a disaster window and option-implied expected returns."""

__version__ = "0.1.0"

from .data import (
    AttentionSeries,
    Direction,
    FactorSeries,
    MatchedPanel,
    ResilienceMeasure,
    ReturnPanel,
    apply_universe_filter,
    ingest_returns,
    load_factors,
    load_resilience,
    match_resilience,
)
from .factors import MODELS, estimate_exposures, risk_adjusted_return, rolling_adjusted_panel
from .inference import andrews_lag, newey_west_mean, ols, stars, white_se
from .portfolios import assign_portfolios, build_portfolio_series, cumulative_series, event_window_stats
from .svix import expected_return, svix_bar, svix_squared

__all__ = [
    "AttentionSeries",
    "Direction",
    "FactorSeries",
    "MatchedPanel",
    "MODELS",
    "ResilienceMeasure",
    "ReturnPanel",
    "andrews_lag",
    "apply_universe_filter",
    "assign_portfolios",
    "build_portfolio_series",
    "cumulative_series",
    "estimate_exposures",
    "event_window_stats",
    "expected_return",
    "ingest_returns",
    "load_factors",
    "load_resilience",
    "match_resilience",
    "newey_west_mean",
    "ols",
    "risk_adjusted_return",
    "rolling_adjusted_panel",
    "stars",
    "svix_bar",
    "svix_squared",
    "white_se",
]
