"""Table- and figure-shaped outputs in Markdown and CSV.

Table cells are rendered with two decimals; the CSV twins keep full
precision. All writers go through :func:`atomic_write_text` so a failed run
never leaves a half-written file behind.
"""

from __future__ import annotations

import io
import math
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import pandas as pd

from .inference import stars
from .portfolios import HIGH, HML, LOW, IndustryCrossSection, PortfolioSeries

ROW_LABELS = {HIGH: "High resilience", LOW: "Low resilience", HML: "High-minus-Low"}
XS_HEADER = ("NAICS", "description", "firms", "resilience")

NAICS3_DESCRIPTIONS = {
    "211": "Oil and gas extraction",
    "212": "Mining, except oil and gas",
    "213": "Support activities for mining",
    "221": "Utilities",
    "236": "Construction of buildings",
    "311": "Food manufacturing",
    "325": "Chemicals",
    "332": "Fabricated metal products",
    "333": "Machinery",
    "334": "Computer and electronic products",
    "335": "Electrical equipment and appliances",
    "336": "Transportation equipment",
    "339": "Miscellaneous durable goods manufacturing",
    "423": "Wholesale trade: Durable goods",
    "424": "Wholesale trade: Nondurable goods",
    "441": "Motor vehicle and parts dealers",
    "452": "General merchandise stores",
    "481": "Air transportation",
    "483": "Water transportation",
    "511": "Publishing industries, except Internet",
    "515": "Broadcasting, except Internet",
    "517": "Telecommunications",
    "518": "Data processing, hosting and related services",
    "519": "Other information services",
    "522": "Credit intermediation and related activities",
    "523": "Securities, commodity contracts, investments, and funds and trusts",
    "524": "Insurance carriers and related activities",
    "531": "Real estate",
    "541": "Professional and technical services",
    "561": "Administrative and support services",
    "621": "Ambulatory health care services",
    "721": "Accommodation",
    "722": "Food services and drinking places",
}


@contextmanager
def atomic_path(target: str | Path):
    """Yield a temporary sibling path; rename it onto ``target`` on success."""
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    os.close(fd)
    umask = os.umask(0)
    os.umask(umask)
    os.chmod(tmp, 0o666 & ~umask)
    try:
        yield Path(tmp)
        os.replace(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def atomic_write_text(target: str | Path, text: str) -> None:
    with atomic_path(target) as tmp:
        tmp.write_text(text, encoding="utf-8", newline="")


def frame_to_csv(frame: pd.DataFrame) -> str:
    buf = io.StringIO()
    frame.to_csv(buf, index=False, lineterminator="\n", float_format="%.17g", date_format="%Y-%m-%d")
    return buf.getvalue()


def fmt(x: float, digits: int = 2) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = f"{x:.{digits}f}"
    return "0.00" if s == "-0.00" and digits == 2 else s


def _md_row(cells: Sequence[str]) -> str:
    return "| " + " | ".join(cells) + " |"


# ---------------------------------------------------------------------------
# event study


def event_study_markdown(study, title: str | None = None) -> str:
    """Mean daily returns in percent with stars, t-statistics in brackets below."""
    cols = list(study.columns)
    lines = []
    if title:
        lines += [title, ""]
    lines.append(_md_row([""] + cols))
    lines.append(_md_row([":---"] + ["---:"] * len(cols)))
    for row in (HIGH, LOW, HML):
        tests = [study.cells[(row, c)] for c in cols]
        lines.append(_md_row([ROW_LABELS[row]] + [fmt(100.0 * t.mean) + stars(t.t_stat) for t in tests]))
        lines.append(_md_row([""] + [f"[{fmt(t.t_stat)}]" for t in tests]))
    lines.append("")
    lines.append(
        "Mean daily returns in percent. t-statistics in brackets use Newey-West standard errors "
        "with a per-series Andrews lag. *, **, *** denote significance at 10%, 5%, 1%."
    )
    return "\n".join(lines) + "\n"


def event_study_frame(study) -> pd.DataFrame:
    rows = []
    for row in (HIGH, LOW, HML):
        for col in study.columns:
            t = study.cells[(row, col)]
            rows.append(
                {"row": ROW_LABELS[row], "column": col, "mean": t.mean, "t_stat": t.t_stat,
                 "hac_se": t.hac_se, "lag": t.lag, "n_obs": t.n_obs, "stars": stars(t.t_stat)}
            )
    return pd.DataFrame(rows)


def portfolio_series_frame(series: Mapping[str, PortfolioSeries]) -> pd.DataFrame:
    parts = []
    for label in (HIGH, LOW, HML):
        s = series[label]
        parts.append(pd.DataFrame({"date": s.dates, "label": label, "ret": s.daily_return, "n_constituents": s.constituents_count}))
    return pd.concat(parts, ignore_index=True).sort_values(["date", "label"], kind="mergesort").reset_index(drop=True)


# ---------------------------------------------------------------------------
# industry cross-section


def industry_xs_markdown(xs: IndustryCrossSection, models: Sequence[str]) -> str:
    lines = [_md_row(list(XS_HEADER) + list(models))]
    lines.append(_md_row([":---:", ":---", ":---:", ":---:"] + ["---:"] * len(models)))
    for r in xs.rows:
        lines.append(
            _md_row([r.naics, r.description, str(r.n_firms), fmt(r.resilience, 0)]
                    + [fmt(r.cumulative_adjusted_return.get(m, math.nan)) for m in models])
        )
    lines += ["", "Cross-sectional regression of cumulative return (%) on resilience", ""]
    lines.append(_md_row([""] + list(models)))
    lines.append(_md_row([":---"] + ["---:"] * len(models)))
    fits = {m: xs.regress(m) for m in models} if len(xs.rows) > 2 else {}
    if fits:
        lines.append(_md_row(["slope per 10 points"] + [fmt(10 * fits[m].coefficients[1]) + stars(fits[m].t_stats[1]) for m in models]))
        lines.append(_md_row([""] + [f"[{fmt(fits[m].t_stats[1])}]" for m in models]))
        lines.append(_md_row(["R2"] + [fmt(fits[m].r_squared) for m in models]))
        lines.append(_md_row(["industries"] + [str(fits[m].n_obs) for m in models]))
    lines.append("")
    lines.append("Cumulative value-weighted adjusted returns in percent. t-statistics in brackets use White standard errors.")
    return "\n".join(lines) + "\n"


def industry_xs_frame(xs: IndustryCrossSection, models: Sequence[str]) -> pd.DataFrame:
    d = xs.regression_input.copy()
    cols = ["naics", "n_firms", "resilience"] + [f"cum_{m}" for m in models]
    return d.reindex(columns=cols)


def regression_frame(xs: IndustryCrossSection, models: Sequence[str]) -> pd.DataFrame:
    rows = []
    for m in models:
        fit = xs.regress(m)
        rows.append(
            {"model": m, "intercept": fit.coefficients[0], "slope": fit.coefficients[1],
             "slope_per_10": 10 * fit.coefficients[1], "t_white": fit.t_stats[1],
             "r_squared": fit.r_squared, "n_obs": fit.n_obs}
        )
    return pd.DataFrame(rows)


# ---------------------------------------------------------------------------
# figure data


def with_markers(frame: pd.DataFrame, markers: Iterable[tuple[str, object]]) -> pd.DataFrame:
    """Prepend one metadata row per event marker (series='marker:<name>')."""
    rows = pd.DataFrame([{"date": pd.Timestamp(d), "series": f"marker:{name}"} for name, d in markers])
    return pd.concat([rows, frame], ignore_index=True).reindex(columns=frame.columns)


def tidy_cumulative(named: Mapping[str, pd.Series]) -> pd.DataFrame:
    parts = [pd.DataFrame({"date": s.index, "series": name, "value": s.to_numpy()}) for name, s in named.items()]
    return pd.concat(parts, ignore_index=True).sort_values(["series", "date"], kind="mergesort").reset_index(drop=True)
