"""Deterministic synthetic panels and option surfaces with recorded truth.

Randomness comes from numpy's Philox counter-based generator. The factor
stream is keyed by ``(seed, 0)`` and firm ``i`` draws from its own substream
``(seed, 1, i)``, so each firm's path does not depend on how many other
firms are generated or in which order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import date
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .data import Direction, FactorSeries, FACTOR_NAMES, ResilienceMeasure, panel_from_records
from .errors import InvalidGrid, InvalidSpec
from .portfolios import lower_median
from .svix import DAYS_PER_YEAR, OptionSurfaceSlice, black_prices

EVENT_START = date(2020, 2, 24)
EVENT_END = date(2020, 3, 20)

DEFAULT_FACTOR_VOL = {"mktrf": 0.010, "smb": 0.005, "hml": 0.006, "rmw": 0.004, "cma": 0.003, "mom": 0.007}
DEFAULT_BETA_RANGE = {
    "mktrf": (0.6, 1.4),
    "smb": (-0.5, 0.8),
    "hml": (-0.5, 0.5),
    "rmw": (-0.4, 0.4),
    "cma": (-0.4, 0.4),
    "mom": (-0.3, 0.3),
}


def _rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int = 42
    n_firms: int = 60
    n_industries: int = 10
    start: date = date(2019, 1, 2)
    end: date = date(2020, 3, 31)
    factor_vol: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_FACTOR_VOL))
    factor_mean: float = 0.0
    rf_daily: float = 0.0001
    industry_values: Sequence[float] | None = None  # affected_share per industry (percent)
    beta_range: Mapping[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_BETA_RANGE))
    model_factors: Sequence[str] = FACTOR_NAMES
    alpha_range: tuple[float, float] = (0.0, 0.0)
    idio_vol: float = 0.02
    cap_range: tuple[float, float] = (50.0, 5000.0)
    crash_start: date = EVENT_START
    crash_end: date = EVENT_END
    low_drift: float = -0.01
    high_drift: float = 0.0

    def validate(self) -> None:
        if self.n_firms < 2 or self.n_industries < 1 or self.n_industries > 900:
            raise InvalidSpec("need n_firms >= 2 and 1 <= n_industries <= 900")
        if self.end <= self.start:
            raise InvalidSpec("end must follow start")
        if self.idio_vol < 0 or any(v < 0 for v in self.factor_vol.values()):
            raise InvalidSpec("volatilities must be nonnegative")
        unknown = set(self.model_factors) - set(FACTOR_NAMES)
        if unknown:
            raise InvalidSpec(f"unknown factors {sorted(unknown)}")
        if self.industry_values is not None and len(self.industry_values) != self.n_industries:
            raise InvalidSpec("industry_values must have one entry per industry")
        lo, hi = self.cap_range
        if not 0 < lo <= hi:
            raise InvalidSpec("cap_range must be positive and ordered")


@dataclass(frozen=True)
class SyntheticData:
    panel: object  # ReturnPanel
    factors: FactorSeries
    measure: ResilienceMeasure
    truth: pd.DataFrame  # one row per firm: industry, value, group, alpha, beta_*, cap0
    spec: ScenarioSpec


def null_scenario(**kw) -> ScenarioSpec:
    return ScenarioSpec(low_drift=0.0, high_drift=0.0, **kw)


def industry_codes(n: int) -> list[str]:
    return [str(111 + 7 * i) for i in range(n)]


def generate_panel(spec: ScenarioSpec) -> SyntheticData:
    """Factor-model returns with a crash drift planted on the low-resilience group.

    Each firm's daily excess return is alpha + beta . f + drift + noise, with
    the drift applied only inside the crash window. The group is the same
    lower-median split that the portfolio engine uses, so the truth record
    lines up with the pipeline's High/Low sets.
    """
    spec.validate()
    dates = pd.bdate_range(spec.start, spec.end)
    T = len(dates)
    frng = _rng(spec.seed, 0)
    fac = np.empty((T, len(FACTOR_NAMES)))
    for j, name in enumerate(FACTOR_NAMES):
        fac[:, j] = spec.factor_mean + spec.factor_vol.get(name, 0.0) * frng.standard_normal(T)
    factor_frame = pd.DataFrame(fac, index=pd.DatetimeIndex(dates, name="date"), columns=list(FACTOR_NAMES))
    factor_frame["rf"] = spec.rf_daily
    factors = FactorSeries(factor_frame)

    codes = industry_codes(spec.n_industries)
    if spec.industry_values is None:
        values = np.round(np.linspace(15.0, 75.0, spec.n_industries), 6)
    else:
        values = np.asarray(spec.industry_values, dtype=float)
    measure = ResilienceMeasure("KP", "affected_share", 3, Direction.LOW_RES_IF_HIGH, dict(zip(codes, values)))

    firm_industry = [i % spec.n_industries for i in range(spec.n_firms)]
    firm_value = values[firm_industry]
    median = lower_median(firm_value)
    crash = ((dates >= pd.Timestamp(spec.crash_start)) & (dates <= pd.Timestamp(spec.crash_end))).astype(float)

    model_idx = [FACTOR_NAMES.index(f) for f in spec.model_factors]
    rets, caps_all, firms, naics_all, truth = [], [], [], [], []
    for i in range(spec.n_firms):
        r = _rng(spec.seed, 1, i)
        betas = np.zeros(len(FACTOR_NAMES))
        for j in model_idx:
            lo, hi = spec.beta_range[FACTOR_NAMES[j]]
            betas[j] = r.uniform(lo, hi)
        alpha = r.uniform(*spec.alpha_range) if spec.alpha_range[1] > spec.alpha_range[0] else spec.alpha_range[0]
        cap0 = math.exp(r.uniform(math.log(spec.cap_range[0]), math.log(spec.cap_range[1])))
        eps = spec.idio_vol * r.standard_normal(T)
        group = "High" if firm_value[i] <= median else "Low"
        drift = (spec.low_drift if group == "Low" else spec.high_drift) * crash
        exret = alpha + fac @ betas + drift + eps
        ret = exret + spec.rf_daily
        caps = cap0 * np.cumprod(1.0 + ret)
        # market cap recorded at the close of each day
        naics = codes[firm_industry[i]] + str(100 + i % 900)[-3:]
        firm = f"F{i:04d}"
        rets.append(ret)
        caps_all.append(caps)
        firms.append(firm)
        naics_all.append(naics)
        truth.append(
            {"firm_id": firm, "industry": codes[firm_industry[i]], "value": firm_value[i], "group": group,
             "alpha": alpha, "cap0": cap0, **{f"beta_{f}": betas[k] for k, f in enumerate(FACTOR_NAMES)}}
        )
    frame = pd.DataFrame({
        "date": np.tile(dates.to_numpy(), spec.n_firms),
        "firm_id": np.repeat(firms, T),
        "ret": np.concatenate(rets),
        "mktcap": np.concatenate(caps_all),
        "naics": np.repeat(naics_all, T),
    })
    panel = panel_from_records(frame, factors)
    return SyntheticData(panel, factors, measure, pd.DataFrame(truth), spec)


def generate_surface(
    underlying_id: str,
    day: date,
    days: int,
    spot: float,
    rate: float,
    sigma: float,
    n_strikes: int = 800,
    lo: float = 0.01,
    hi: float = 10.0,
) -> tuple[OptionSurfaceSlice, float]:
    """Lognormal option slice on a uniform grid [lo F, hi F]; returns (slice, true SVIX^2).

    ``rate`` is a continuously compounded annual rate; no dividends, so the
    forward is spot * R_f.
    """
    if sigma <= 0:
        raise InvalidGrid("sigma must be positive")
    if n_strikes < 2 or not 0 < lo < 1 < hi:
        raise InvalidGrid("grid must have >= 2 strikes and bracket the forward")
    years = days / DAYS_PER_YEAR
    rf_gross = math.exp(rate * years)
    forward = spot * rf_gross
    strikes = np.linspace(lo * forward, hi * forward, n_strikes)
    calls, puts = black_prices(forward, strikes, rf_gross, sigma, years)
    # enforce parity exactly: take the OTM side and derive the other
    parity = (forward - strikes) / rf_gross
    otm_put = strikes < forward
    calls = np.where(otm_put, puts + parity, calls)
    puts = np.where(otm_put, puts, calls - parity)
    calls = np.maximum(calls, 0.0)
    puts = np.maximum(puts, 0.0)
    sl = OptionSurfaceSlice(underlying_id, day, days, spot, forward, rf_gross, strikes, calls, puts)
    return sl, math.expm1(sigma * sigma * years)


def scenario(name: str, seed: int, **overrides) -> ScenarioSpec:
    if name == "crash":
        base = ScenarioSpec(seed=seed)
    elif name == "null":
        base = null_scenario(seed=seed)
    else:
        raise InvalidSpec(f"unknown scenario {name!r}; use 'crash' or 'null'")
    return replace(base, **overrides)


def generate_attention(spec: ScenarioSpec, start: date = date(2020, 1, 2)) -> pd.Series:
    """Logistic attention index that surges around the crash window, with mild noise."""
    dates = pd.bdate_range(start, spec.end)
    t = np.arange(len(dates), dtype=float)
    mid = float(np.searchsorted(dates, pd.Timestamp(spec.crash_start)))
    level = 100.0 / (1.0 + np.exp(-(t - mid) / 4.0))
    noise = _rng(spec.seed, 2).normal(0.0, 1.0, len(dates))
    return pd.Series(np.maximum(level + noise, 0.0), index=pd.DatetimeIndex(dates, name="date"), name="value")


def generate_surfaces(
    data: SyntheticData,
    dates: Sequence[date],
    maturities: Sequence[int] = (30, 91, 365, 730),
    sigma_high: float = 0.30,
    sigma_low: float = 0.30,
    crash_sigma_low: float = 0.60,
    sigma_market: float = 0.20,
    rate: float = 0.01,
    n_strikes: int = 120,
    market_id: str = "MARKET",
) -> list[OptionSurfaceSlice]:
    """Lognormal surfaces for every synthetic firm plus a market index.

    Low-resilience firms trade at ``crash_sigma_low`` from the crash start
    onward, which opens a positive Low-minus-High SVIX gap of known size.
    """
    truth = data.truth.set_index("firm_id")
    caps = data.panel.frame.set_index(["date", "firm_id"])["mktcap"]
    slices = []
    for day in dates:
        crashed = day >= data.spec.crash_start
        for days in maturities:
            sl, _ = generate_surface(market_id, day, days, 100.0, rate, sigma_market, n_strikes, 0.02, 8.0)
            slices.append(sl)
            for firm, row in truth.iterrows():
                sigma = sigma_high if row["group"] == "High" else (crash_sigma_low if crashed else sigma_low)
                spot = 100.0 * float(caps.loc[(pd.Timestamp(day), firm)]) / float(row["cap0"])
                sl, _ = generate_surface(firm, day, days, spot, rate, sigma, n_strikes, 0.02, 8.0)
                slices.append(sl)
    return slices
