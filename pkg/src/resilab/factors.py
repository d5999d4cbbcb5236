"""Factor exposures by firm-level OLS and factor-model-adjusted returns."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .data import FactorObservation, FactorSeries, ReturnObservation
from .errors import MissingFactorDate, RankDeficient, RankDeficientDesign
from .inference import ols

MIN_OBS = 127


@dataclass(frozen=True)
class ModelSpec:
    name: str
    factor_list: tuple[str, ...]


MODELS = {
    "capm": ModelSpec("CAPM", ("mktrf",)),
    "ff3": ModelSpec("FF3", ("mktrf", "smb", "hml")),
    "ff4": ModelSpec("FF4", ("mktrf", "smb", "hml", "mom")),
    "ff5": ModelSpec("FF5", ("mktrf", "smb", "hml", "rmw", "cma")),
    "ff6": ModelSpec("FF6", ("mktrf", "smb", "hml", "rmw", "cma", "mom")),
}


def get_model(name: str | ModelSpec) -> ModelSpec:
    if isinstance(name, ModelSpec):
        return name
    try:
        return MODELS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {', '.join(MODELS)}") from None


@dataclass(frozen=True)
class ExposureSet:
    firm_id: str
    model: ModelSpec
    alpha: float
    betas: Mapping[str, float]
    n_obs: int
    window: tuple[date, date]
    std_errors: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ExposureEstimates:
    """Fitted exposures keyed by firm, plus firms omitted for too few observations."""

    model: ModelSpec
    window: tuple[date, date]
    exposures: Mapping[str, ExposureSet]
    omitted: Mapping[str, int]

    def __len__(self):
        return len(self.exposures)

    def __getitem__(self, firm_id: str) -> ExposureSet:
        return self.exposures[firm_id]

    def __iter__(self):
        return iter(self.exposures.values())

    def beta_frame(self) -> pd.DataFrame:
        rows = {f: dict(e.betas) for f, e in self.exposures.items()}
        return pd.DataFrame.from_dict(rows, orient="index", columns=list(self.model.factor_list))


def _window_bounds(window) -> tuple[pd.Timestamp, pd.Timestamp]:
    start, end = window
    return pd.Timestamp(start), pd.Timestamp(end)


def _check_factor_coverage(dates: pd.Series, factors: FactorSeries) -> None:
    missing = pd.DatetimeIndex(dates.unique()).difference(factors.dates)
    if len(missing):
        raise MissingFactorDate(f"no factor returns on {missing[0].date()} ({len(missing)} dates missing)")


def estimate_exposures(
    panel,
    factors: FactorSeries,
    model: str | ModelSpec,
    window,
    min_obs: int = MIN_OBS,
) -> ExposureEstimates:
    """Per-firm OLS of daily excess returns on an intercept and the model factors.

    ``panel`` is any object with a long ``frame`` holding date, firm_id and
    exret (ReturnPanel or MatchedPanel). Firms with fewer than ``min_obs``
    matched days inside ``window`` are listed in ``omitted``.
    """
    model = get_model(model)
    start, end = _window_bounds(window)
    if end < start:
        raise ValueError("estimation window is empty")
    frame = panel.frame
    in_window = frame.loc[(frame["date"] >= start) & (frame["date"] <= end), ["date", "firm_id", "exret"]]
    in_window = in_window.dropna(subset=["exret"])
    _check_factor_coverage(in_window["date"], factors)
    cols = list(model.factor_list)
    merged = in_window.join(factors.frame[cols], on="date", how="inner")
    merged = merged.sort_values(["firm_id", "date"], kind="mergesort")
    firms = merged["firm_id"].to_numpy()
    y_all = merged["exret"].to_numpy(dtype=float)
    f_all = merged[cols].to_numpy(dtype=float)
    names, starts = np.unique(firms, return_index=True)
    bounds = list(starts) + [len(firms)]

    exposures, omitted = {}, {}
    for k, firm in enumerate(map(str, names)):
        lo, hi = bounds[k], bounds[k + 1]
        n = int(hi - lo)
        if n < min_obs:
            omitted[firm] = n
            continue
        X = np.column_stack([np.ones(n), f_all[lo:hi]])
        try:
            res = ols(y_all[lo:hi], X)
        except RankDeficient:
            raise RankDeficientDesign(firm) from None
        se = res.std_errors
        exposures[firm] = ExposureSet(
            firm_id=firm,
            model=model,
            alpha=float(res.coefficients[0]),
            betas={c: float(b) for c, b in zip(cols, res.coefficients[1:])},
            n_obs=n,
            window=(start.date(), end.date()),
            std_errors={"alpha": float(se[0]), **{c: float(s) for c, s in zip(cols, se[1:])}},
        )
    return ExposureEstimates(model, (start.date(), end.date()), exposures, omitted)


def risk_adjusted_return(
    obs: ReturnObservation, exposure: ExposureSet, factors_on_date: FactorObservation
) -> float:
    """Excess return minus beta-weighted factor returns; alpha is kept in."""
    if obs.date != factors_on_date.date:
        raise MissingFactorDate(f"factor observation is for {factors_on_date.date}, not {obs.date}")
    adj = obs.excess_return
    for name, beta in exposure.betas.items():
        adj -= beta * factors_on_date[name]
    return adj


@dataclass(frozen=True)
class AdjustedPanel:
    """Risk-adjusted returns in long format: date, firm_id, exret, adj."""

    model: ModelSpec
    frame: pd.DataFrame
    exposures: Mapping = field(default_factory=dict)

    def as_series(self) -> pd.Series:
        return self.frame.set_index(["date", "firm_id"])["adj"]


def adjust_returns(panel, estimates: ExposureEstimates, factors: FactorSeries, period=None) -> AdjustedPanel:
    """Apply fitted betas to every panel row in ``period`` for firms that have exposures."""
    model = estimates.model
    frame = panel.frame
    if period is not None:
        start, end = _window_bounds(period)
        frame = frame.loc[(frame["date"] >= start) & (frame["date"] <= end)]
    frame = frame.loc[frame["firm_id"].isin(estimates.exposures.keys()), ["date", "firm_id", "exret"]]
    _check_factor_coverage(frame["date"], factors)
    cols = list(model.factor_list)
    betas = estimates.beta_frame()
    B = betas.reindex(frame["firm_id"]).to_numpy(dtype=float)
    F = factors.frame[cols].reindex(pd.DatetimeIndex(frame["date"])).to_numpy(dtype=float)
    # accumulate factor by factor in model order, matching the scalar definition
    adj = frame["exret"].to_numpy(dtype=float).copy()
    for j in range(len(cols)):
        adj -= B[:, j] * F[:, j]
    out = frame.reset_index(drop=True).copy()
    out["adj"] = adj
    return AdjustedPanel(model, out, {estimates.window: estimates})


def rolling_adjusted_panel(
    panel,
    factors: FactorSeries,
    model: str | ModelSpec,
    years: Sequence[int],
    min_obs: int = MIN_OBS,
) -> AdjustedPanel:
    """Estimate on each calendar year Y and adjust returns throughout Y + 1."""
    model = get_model(model)
    years = list(years)
    if not years:
        raise ValueError("need at least one estimation year")
    if any(b - a != 1 for a, b in zip(years, years[1:])):
        raise ValueError(f"years must be consecutive, got {years}")
    pieces, fitted = [], {}
    for y in years:
        est = estimate_exposures(panel, factors, model, (date(y, 1, 1), date(y, 12, 31)), min_obs)
        adj = adjust_returns(panel, est, factors, (date(y + 1, 1, 1), date(y + 1, 12, 31)))
        pieces.append(adj.frame)
        fitted[est.window] = est
    frame = pd.concat(pieces, ignore_index=True) if pieces else pd.DataFrame(columns=["date", "firm_id", "exret", "adj"])
    frame = frame.sort_values(["date", "firm_id"], kind="mergesort").reset_index(drop=True)
    return AdjustedPanel(model, frame, fitted)


EXPOSURE_COLUMNS = (
    "firm_id", "model", "window_start", "window_end", "n_obs", "alpha",
    "beta_mktrf", "beta_smb", "beta_hml", "beta_mom", "beta_rmw", "beta_cma",
)


def write_exposures(estimates: Iterable[ExposureEstimates], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EXPOSURE_COLUMNS)
        for est in estimates:
            for firm in sorted(est.exposures):
                e = est.exposures[firm]
                betas = [repr(e.betas[f]) if f in e.betas else "" for f in ("mktrf", "smb", "hml", "mom", "rmw", "cma")]
                w.writerow([firm, e.model.name, e.window[0].isoformat(), e.window[1].isoformat(), e.n_obs, repr(e.alpha)] + betas)


def read_exposures(path: str | Path) -> list[ExposureSet]:
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            model = get_model(rec["model"])
            out.append(
                ExposureSet(
                    firm_id=rec["firm_id"],
                    model=model,
                    alpha=float(rec["alpha"]),
                    betas={f: float(rec[f"beta_{f}"]) for f in model.factor_list},
                    n_obs=int(rec["n_obs"]),
                    window=(date.fromisoformat(rec["window_start"]), date.fromisoformat(rec["window_end"])),
                )
            )
    return out
