"""``resilab`` command-line entry point.

Each command computes all of its outputs in memory first and only then
writes them, each file atomically, so a failing run leaves nothing behind.
Errors print one ``error: <Kind>: <message>`` line on stderr and exit 1.
"""

from __future__ import annotations

import argparse
import logging
import sys
from datetime import date
from pathlib import Path
from typing import Callable

import pandas as pd

from . import __version__
from .config import RunConfig, load_config, parse_config_text
from .data import (
    FactorSeries,
    ReturnPanel,
    apply_universe_filter,
    ingest_returns,
    load_attention,
    load_factors,
    load_resilience,
    match_resilience,
    select_measure,
    write_factors,
    write_resilience,
    write_returns,
)
from .errors import ResilabError
from .factors import estimate_exposures, get_model, rolling_adjusted_panel, write_exposures
from .pipeline import adjusted_panels, event_study, industry_xs
from .portfolios import HIGH, HML, LOW, attention_regression, build_portfolio_series, cumulative_series
from .reports import (
    NAICS3_DESCRIPTIONS,
    atomic_path,
    atomic_write_text,
    event_study_frame,
    event_study_markdown,
    frame_to_csv,
    industry_xs_frame,
    industry_xs_markdown,
    portfolio_series_frame,
    regression_frame,
    tidy_cumulative,
    with_markers,
)
from .svix import MARKET_ID, expected_returns_table, load_surface, resilience_svix_indices, svix_frame, svix_squared, write_surface

log = logging.getLogger("resilab")

Outputs = dict[str, Callable[[Path], None] | str]


def _write_outputs(out: Path, outputs: Outputs) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, payload in outputs.items():
        target = out / name
        if isinstance(payload, str):
            atomic_write_text(target, payload)
        else:
            with atomic_path(target) as tmp:
                payload(tmp)
        log.info("wrote %s", target)


# ---------------------------------------------------------------------------
# shared loading


def _load_core(cfg: RunConfig) -> tuple[ReturnPanel, FactorSeries]:
    cfg.require("returns", "factors")
    factors = load_factors(cfg.factors)
    panel = ingest_returns(cfg.returns, factors, strict=cfg.strict)
    if panel.diagnostics:
        log.warning("%d malformed return rows skipped (first: %s)", len(panel.diagnostics), panel.diagnostics[0])
    return panel, factors


def _load_matched(cfg: RunConfig):
    cfg.require("returns", "factors", "resilience")
    panel, factors = _load_core(cfg)
    measure = select_measure(load_resilience(cfg.resilience), cfg.measure, cfg.naics_level)
    matched = match_resilience(apply_universe_filter(panel, cfg.min_cap), measure)
    log.info("matched %d firms in %d industries", matched.coverage["firms_kept"], matched.coverage["industries_matched"])
    return matched, factors


# ---------------------------------------------------------------------------
# commands


def _say(cfg: RunConfig, text: str) -> None:
    if not cfg.quiet:
        print(text)


def cmd_ingest(cfg: RunConfig, args) -> Outputs:
    panel, factors = _load_core(cfg)
    diag = pd.DataFrame(
        [{"row": getattr(d, "row", ""), "kind": type(d).__name__, "message": str(d)} for d in panel.diagnostics],
        columns=["row", "kind", "message"],
    )
    _say(cfg, f"{len(panel)} rows, {len(panel.firms)} firms, {len(panel.diagnostics)} rejected rows")
    return {"panel.csv": lambda p: write_returns(panel, p), "diagnostics.csv": frame_to_csv(diag)}


def cmd_exposures(cfg: RunConfig, args) -> Outputs:
    panel, factors = _load_core(cfg)
    panel = apply_universe_filter(panel, cfg.min_cap)
    estimates = [estimate_exposures(panel, factors, get_model(m), cfg.estimation_window, cfg.min_obs) for m in cfg.models]
    for est in estimates:
        log.info("%s: %d firms fitted, %d omitted", est.model.name, len(est), len(est.omitted))
    return {"exposures.csv": lambda p: write_exposures(estimates, p)}


def cmd_event_study(cfg: RunConfig, args) -> Outputs:
    matched, factors = _load_matched(cfg)
    study = event_study(matched, factors, cfg.models, cfg.window, cfg.estimation_window, cfg.period, cfg.tie_rule, cfg.min_obs)
    title = f"{cfg.measure}, {cfg.window_start.isoformat()} to {cfg.window_end.isoformat()}"
    md = event_study_markdown(study, title)
    if not cfg.quiet:
        print(md, end="")
    outputs: Outputs = {"event_study.md": md, "event_study.csv": frame_to_csv(event_study_frame(study))}
    for col in study.columns:
        outputs[f"portfolio_series_{col}.csv"] = frame_to_csv(portfolio_series_frame(study.series[col]))
    return outputs


def cmd_industry_xs(cfg: RunConfig, args) -> Outputs:
    matched, factors = _load_matched(cfg)
    models = cfg.models
    descriptions = NAICS3_DESCRIPTIONS if matched.measure.naics_level == 3 else {}
    xs = industry_xs(matched, factors, models, cfg.window, cfg.estimation_window, cfg.top_n, cfg.min_obs, descriptions)
    md = industry_xs_markdown(xs, models)
    if not cfg.quiet:
        print(md, end="")
    return {
        "industry_xs.md": md,
        "industry_xs.csv": frame_to_csv(industry_xs_frame(xs, models)),
        "industry_xs_regression.csv": frame_to_csv(regression_frame(xs, models)),
    }


def _svix_values(cfg: RunConfig):
    cfg.require("surface")
    slices = load_surface(cfg.surface)
    if cfg.maturities:
        slices = [s for s in slices if s.maturity_days in cfg.maturities]
    return svix_frame(svix_squared(s) for s in slices)


def cmd_svix(cfg: RunConfig, args) -> Outputs:
    values = _svix_values(cfg)
    cols = ["date", "underlying_id", "days", "svix2_raw", "svix2_pa", "tail_share"]
    outputs: Outputs = {"svix_out.csv": frame_to_csv(values[cols])}
    if cfg.returns and cfg.factors and cfg.resilience:
        matched, _ = _load_matched(cfg)
        idx = resilience_svix_indices(values.loc[values["underlying_id"] != cfg.market_id], matched, cfg.tie_rule)
        outputs["svix_indices.csv"] = frame_to_csv(idx)
    _say(cfg, f"{len(values)} SVIX values computed")
    return outputs


def cmd_expected_returns(cfg: RunConfig, args) -> Outputs:
    values = _svix_values(cfg)
    panel, _ = _load_core(cfg)
    table = expected_returns_table(values, panel.frame, cfg.market_id, cfg.ids or None)
    if not cfg.quiet:
        print(table.to_string(index=False))
    return {"expected_returns.csv": frame_to_csv(table)}


def _figure_series(study_series, mode: str, prefix: str = "") -> dict[str, pd.Series]:
    return {f"{prefix}{label}": cumulative_series(study_series[label], mode) for label in (HIGH, LOW, HML)}


def cmd_figure_data(cfg: RunConfig, args) -> Outputs:
    fig = args.figure
    markers = [("event_start", cfg.window_start), ("event_end", cfg.window_end)]
    start, end = pd.Timestamp(cfg.period_start), pd.Timestamp(cfg.period_end)
    if fig == "f1":
        matched, factors = _load_matched(cfg)
        dates = matched.dates[(matched.dates >= start) & (matched.dates <= end)]
        series = build_portfolio_series(matched, tie_rule=cfg.tie_rule, dates=dates)
        named = _figure_series(series, cfg.cumulation or "geometric_compound")
        named["market"] = cumulative_series(factors.frame["mktrf"].loc[start:end].rename("market"), "geometric_compound")
        if cfg.attention is not None:
            att = load_attention(cfg.attention)
            named["attention"] = att.values.loc[start:end]
            fit = attention_regression(series[HML], att)
            log.info("attention regression: slope %.4g, R2 %.3f", fit.slope, fit.r_squared)
        frame = tidy_cumulative(named)
    elif fig in ("f2", "f4"):
        matched, factors = _load_matched(cfg)
        named = {}
        for m in cfg.models:
            if fig == "f2":
                adj = adjusted_panels(matched, factors, [m], cfg.estimation_window, cfg.period, cfg.min_obs)[m]
            else:
                years = cfg.years or tuple(range(2013, 2020))
                adj = rolling_adjusted_panel(matched, factors, m, years, cfg.min_obs)
            series = build_portfolio_series(matched, adj, tie_rule=cfg.tie_rule)
            named.update(_figure_series(series, cfg.cumulation or "arithmetic_sum", prefix=f"{m}:"))
        frame = tidy_cumulative(named)
    elif fig == "f5":
        values = _svix_values(cfg)
        matched, _ = _load_matched(cfg)
        frame = resilience_svix_indices(values.loc[values["underlying_id"] != cfg.market_id], matched, cfg.tie_rule)
        frame.insert(1, "series", "svix_index")
    elif fig == "f6":
        values = _svix_values(cfg)
        panel, _ = _load_core(cfg)
        table = expected_returns_table(values, panel.frame, cfg.market_id, cfg.ids or None)
        frame = table[["date", "underlying_id", "days", "premium_over_rf", "premium_pa"]].copy()
        frame.insert(1, "series", "expected_return")
    else:
        raise ResilabError(f"unknown figure {fig!r}")
    return {f"figure_{fig}.csv": frame_to_csv(with_markers(frame, markers))}


def cmd_synth(cfg: RunConfig, args) -> Outputs:
    from .synth import generate_attention, generate_panel, generate_surfaces, scenario

    spec = scenario(args.scenario, cfg.seed, n_firms=args.n_firms)
    data = generate_panel(spec)
    truth = data.truth
    attention = generate_attention(spec).rename_axis("date").reset_index()
    outputs: Outputs = {
        "returns.csv": lambda p: write_returns(data.panel, p),
        "factors.csv": lambda p: write_factors(data.factors, p),
        "resilience.csv": lambda p: write_resilience([data.measure], p),
        "attention.csv": frame_to_csv(attention),
        "truth.csv": frame_to_csv(truth),
    }
    if args.with_surface:
        days = [date.fromisoformat(d) for d in args.surface_dates.split(",")]
        slices = generate_surfaces(data, days, cfg.maturities)
        outputs["surface.csv"] = lambda p: write_surface(slices, p)
    _say(cfg, f"scenario {args.scenario}, seed {cfg.seed}: {len(data.panel)} rows for {spec.n_firms} firms")
    return outputs


COMMANDS = {
    "ingest": cmd_ingest,
    "exposures": cmd_exposures,
    "event-study": cmd_event_study,
    "industry-xs": cmd_industry_xs,
    "svix": cmd_svix,
    "expected-returns": cmd_expected_returns,
    "figure-data": cmd_figure_data,
    "synth": cmd_synth,
}


def _date(s: str) -> date:
    return date.fromisoformat(s)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--config", type=Path, help="flat key = value configuration file")
    g.add_argument("--out", type=Path, help="output directory (default: out)")
    g.add_argument("--seed", type=int)
    g.add_argument("--quiet", action="store_true", default=None)
    g.add_argument("--strict", action="store_true", default=None, help="fail on the first malformed row")

    inputs = argparse.ArgumentParser(add_help=False)
    i = inputs.add_argument_group("inputs")
    i.add_argument("--returns", type=Path)
    i.add_argument("--factors", type=Path)
    i.add_argument("--resilience", type=Path)
    i.add_argument("--attention", type=Path)
    i.add_argument("--surface", type=Path)
    i.add_argument("--measure", help="FAMILY:name, e.g. KP:affected_share")
    i.add_argument("--naics-level", type=int, dest="naics_level")
    i.add_argument("--model", dest="models", help="comma-separated: capm,ff3,ff4,ff5,ff6")
    i.add_argument("--from", dest="window_start", help="event window start (YYYY-MM-DD)")
    i.add_argument("--to", dest="window_end", help="event window end (YYYY-MM-DD)")
    i.add_argument("--est-from", dest="estimation_start")
    i.add_argument("--est-to", dest="estimation_end")
    i.add_argument("--period-from", dest="period_start")
    i.add_argument("--period-to", dest="period_end")
    i.add_argument("--cumulation", choices=["arithmetic_sum", "geometric_compound"])
    i.add_argument("--tie-rule", dest="tie_rule", choices=["high", "low"])
    i.add_argument("--min-obs", dest="min_obs", type=int)
    i.add_argument("--min-cap", dest="min_cap", type=float)
    i.add_argument("--maturity", dest="maturities", help="comma-separated maturities in days")
    i.add_argument("--top-n", dest="top_n", type=int)
    i.add_argument("--years", help="comma-separated estimation years for rolling exposures")
    i.add_argument("--ids", help="comma-separated underlying ids")
    i.add_argument("--market-id", dest="market_id")

    parser = argparse.ArgumentParser(prog="resilab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"resilab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common, inputs])
        if name == "figure-data":
            p.add_argument("--figure", required=True, choices=["f1", "f2", "f4", "f5", "f6"])
        if name == "synth":
            p.add_argument("--scenario", default="crash", choices=["crash", "null"])
            p.add_argument("--n-firms", dest="n_firms", type=int, default=60)
            p.add_argument("--with-surface", action="store_true")
            p.add_argument("--surface-dates", default="2020-01-02,2020-02-24,2020-03-20,2020-03-31")
    return parser


OVERRIDE_KEYS = (
    "out", "seed", "quiet", "strict", "returns", "factors", "resilience", "attention", "surface", "measure",
    "naics_level", "models", "window_start", "window_end", "estimation_start", "estimation_end",
    "period_start", "period_end", "cumulation", "tie_rule", "min_obs", "min_cap", "maturities",
    "top_n", "years", "ids", "market_id",
)

# industry-xs reports the three columns of the industry table unless told otherwise
COMMAND_DEFAULTS = {"industry-xs": {"models": "capm,ff3,ff5"}}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {k: getattr(args, k, None) for k in OVERRIDE_KEYS}
    try:
        in_file = parse_config_text(args.config.read_text(encoding="utf-8")) if args.config and args.config.is_file() else {}
        for key, value in COMMAND_DEFAULTS.get(args.command, {}).items():
            if overrides.get(key) is None and key not in in_file:
                overrides[key] = value
        cfg = load_config(args.config, overrides)
        logging.basicConfig(level=logging.WARNING if cfg.quiet else logging.INFO, format="%(message)s", stream=sys.stderr)
        outputs = COMMANDS[args.command](cfg, args)
        _write_outputs(cfg.out, outputs)
    except (ResilabError, OSError, ValueError, KeyError) as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
