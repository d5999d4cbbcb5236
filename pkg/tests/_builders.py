"""Small constructors shared by the test modules."""

from __future__ import annotations

import numpy as np
import pandas as pd

from resilab.data import (
    FACTOR_NAMES,
    Direction,
    FactorSeries,
    ResilienceMeasure,
    match_resilience,
    panel_from_records,
)


def flat_factors(dates, rf=0.0, values=None) -> FactorSeries:
    idx = pd.DatetimeIndex(pd.to_datetime(list(dates)), name="date")
    frame = pd.DataFrame(0.0, index=idx, columns=list(FACTOR_NAMES))
    if values is not None:
        for name, col in values.items():
            frame[name] = np.asarray(col, dtype=float)
    frame["rf"] = rf
    return FactorSeries(frame)


def random_factors(dates, seed=0, scale=0.01, rf=0.0) -> FactorSeries:
    rng = np.random.default_rng(seed)
    vals = {f: scale * rng.standard_normal(len(dates)) for f in FACTOR_NAMES}
    return flat_factors(dates, rf, vals)


def kp_measure(entries, direction=Direction.LOW_RES_IF_HIGH, name="affected_share") -> ResilienceMeasure:
    return ResilienceMeasure("KP", name, 3, direction, {str(k): float(v) for k, v in entries.items()})


def matched_from(records: pd.DataFrame, measure: ResilienceMeasure, factors: FactorSeries | None = None):
    """MatchedPanel from a frame with date, firm_id, ret, mktcap, naics."""
    records = records.copy()
    records["date"] = pd.to_datetime(records["date"])
    if factors is None:
        factors = flat_factors(sorted(records["date"].unique()))
    return match_resilience(panel_from_records(records, factors), measure)


def random_matched(n_firms=40, n_days=5, n_industries=8, seed=0, start="2020-02-24"):
    rng = np.random.default_rng(seed)
    dates = pd.bdate_range(start, periods=n_days)
    codes = [str(300 + i) for i in range(n_industries)]
    values = dict(zip(codes, np.round(rng.uniform(0, 100, n_industries), 2)))
    rows = []
    for i in range(n_firms):
        code = codes[i % n_industries]
        cap = rng.uniform(20, 2000)
        for d in dates:
            rows.append((d, f"F{i:03d}", rng.normal(0, 0.02), cap, code + "111"))
            cap *= np.exp(rng.normal(0, 0.02))
    frame = pd.DataFrame(rows, columns=["date", "firm_id", "ret", "mktcap", "naics"])
    return matched_from(frame, kp_measure(values))
