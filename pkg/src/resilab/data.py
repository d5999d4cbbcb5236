"""Canonical data model, CSV ingestion and industry matching.

Every loader validates row by row. Row-level defects in ``returns.csv`` are
collected as diagnostics (the offending row is skipped) unless ``strict=True``;
structural problems such as a missing column or a duplicated (date, firm)
key always raise.

Row numbers in diagnostics are physical line numbers of the CSV file, so the
header is line 1 and the first data row is line 2.
"""

from __future__ import annotations

import csv
import enum
import math
import re
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np
import pandas as pd

from .errors import (
    DataError,
    DuplicateObservation,
    ExcessReturnMismatch,
    InvalidMeasure,
    InvalidNaics,
    MissingColumn,
    NaicsTooShort,
    NonFiniteValue,
    NonPositiveMarketCap,
    UnknownDateInFactors,
)

FACTOR_NAMES = ("mktrf", "smb", "hml", "rmw", "cma", "mom")
FACTOR_COLUMNS = FACTOR_NAMES + ("rf",)
RETURN_COLUMNS = ("date", "firm_id", "ret", "mktcap", "naics")
RESILIENCE_COLUMNS = ("family", "name", "naics_level", "direction", "naics", "value")
ATTENTION_COLUMNS = ("date", "value")

EXCESS_TOLERANCE = 1e-10
_NAICS_RE = re.compile(r"^[0-9]{2,6}$")


class Direction(str, enum.Enum):
    """How a raw measure value maps to resilience."""

    LOW_RES_IF_HIGH = "low_res_if_high"
    HIGH_RES_IF_HIGH = "high_res_if_high"


FAMILY_LEVELS = {"KP": (3,), "DN": (2, 3), "HLR": (4,)}

MEASURE_DIRECTIONS = {
    # KP: face-to-face and proximity shares
    "affected_share": Direction.LOW_RES_IF_HIGH,
    "presence_share": Direction.LOW_RES_IF_HIGH,
    "teamwork_share": Direction.LOW_RES_IF_HIGH,
    "customer_share": Direction.LOW_RES_IF_HIGH,
    "communication_share": Direction.LOW_RES_IF_HIGH,
    # DN: teleworkability
    "teleworkable_emp": Direction.HIGH_RES_IF_HIGH,
    "teleworkable_wage": Direction.HIGH_RES_IF_HIGH,
    "teleworkable_manual_emp": Direction.HIGH_RES_IF_HIGH,
    "teleworkable_manual_wage": Direction.HIGH_RES_IF_HIGH,
    # HLR: work at home / at the workplace
    "home": Direction.HIGH_RES_IF_HIGH,
    "dur_home": Direction.HIGH_RES_IF_HIGH,
    "share_home": Direction.HIGH_RES_IF_HIGH,
    "workplace": Direction.LOW_RES_IF_HIGH,
    "dur_workplace": Direction.LOW_RES_IF_HIGH,
}


def parse_date(raw: str) -> date:
    return date.fromisoformat(raw.strip())


def _finite(raw: str) -> float | None:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        return None
    return value if math.isfinite(value) else None


def _require_columns(header: Iterable[str] | None, required: Iterable[str], path) -> None:
    present = set(() if header is None else header)
    missing = [c for c in required if c not in present]
    if missing:
        raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")


# ---------------------------------------------------------------------------
# factors


@dataclass(frozen=True)
class FactorObservation:
    date: date
    mktrf: float
    smb: float
    hml: float
    rmw: float
    cma: float
    mom: float
    rf: float

    def __getitem__(self, name: str) -> float:
        return getattr(self, name)


@dataclass(frozen=True)
class FactorSeries:
    """Daily factor returns and the risk-free rate, indexed by date."""

    frame: pd.DataFrame

    def __post_init__(self):
        frame = self.frame
        missing = [c for c in FACTOR_COLUMNS if c not in frame.columns]
        if missing:
            raise MissingColumn(f"factor series lacks {', '.join(missing)}")
        index = pd.DatetimeIndex(frame.index)
        if not index.is_monotonic_increasing or index.has_duplicates:
            raise DataError("factor dates must be strictly increasing")
        values = frame.loc[:, list(FACTOR_COLUMNS)].to_numpy(dtype=float)
        if not np.isfinite(values).all():
            bad = int(np.where(~np.isfinite(values).all(axis=1))[0][0])
            raise NonFiniteValue(bad, "factors")
        clean = pd.DataFrame(values, index=index.rename("date"), columns=list(FACTOR_COLUMNS))
        object.__setattr__(self, "frame", clean)

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.frame.index

    def on(self, day) -> FactorObservation:
        ts = pd.Timestamp(day)
        try:
            row = self.frame.loc[ts]
        except KeyError:
            raise UnknownDateInFactors(ts.date()) from None
        return FactorObservation(ts.date(), *(float(row[c]) for c in FACTOR_COLUMNS))

    def rf(self) -> pd.Series:
        return self.frame["rf"]

    def between(self, start, end) -> "FactorSeries":
        return FactorSeries(self.frame.loc[pd.Timestamp(start):pd.Timestamp(end)])


def load_factors(path: str | Path) -> FactorSeries:
    path = Path(path)
    rows, dates = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, ("date",) + FACTOR_COLUMNS, path)
        for lineno, rec in enumerate(reader, start=2):
            try:
                dates.append(parse_date(rec["date"]))
            except ValueError:
                raise NonFiniteValue(lineno, "date", rec["date"]) from None
            vals = []
            for col in FACTOR_COLUMNS:
                v = _finite(rec[col])
                if v is None:
                    raise NonFiniteValue(lineno, col, rec[col])
                vals.append(v)
            rows.append(vals)
    frame = pd.DataFrame(rows, index=pd.DatetimeIndex(dates, name="date"), columns=list(FACTOR_COLUMNS))
    return FactorSeries(frame)


def write_factors(factors: FactorSeries, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("date",) + FACTOR_COLUMNS)
        for ts, row in zip(factors.frame.index, factors.frame.itertuples(index=False)):
            w.writerow([ts.date().isoformat()] + [repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# returns


@dataclass(frozen=True)
class ReturnObservation:
    date: date
    firm_id: str
    excess_return: float
    raw_return: float
    market_cap: float
    naics: str


@dataclass(frozen=True)
class ReturnPanel:
    """Long-format daily panel, one row per (date, firm).

    ``frame`` columns: date, firm_id, ret, exret, mktcap, naics. Rows are
    sorted by (date, firm_id) and the pair is unique.
    """

    frame: pd.DataFrame
    diagnostics: tuple[DataError, ...] = ()

    def __post_init__(self):
        frame = self.frame.loc[:, ["date", "firm_id", "ret", "exret", "mktcap", "naics"]]
        frame = frame.sort_values(["date", "firm_id"], kind="mergesort").reset_index(drop=True)
        dup = frame.duplicated(["date", "firm_id"])
        if dup.any():
            first = frame.loc[dup.idxmax()]
            raise DuplicateObservation(
                f"duplicate observation for firm {first.firm_id} on {first.date.date()}"
            )
        object.__setattr__(self, "frame", frame)

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def firms(self) -> list[str]:
        return sorted(self.frame["firm_id"].unique())

    @property
    def dates(self) -> pd.DatetimeIndex:
        return pd.DatetimeIndex(sorted(self.frame["date"].unique()))

    def observations(self) -> Iterable[ReturnObservation]:
        for r in self.frame.itertuples(index=False):
            yield ReturnObservation(r.date.date(), r.firm_id, r.exret, r.ret, r.mktcap, r.naics)

    def with_frame(self, frame: pd.DataFrame) -> "ReturnPanel":
        return ReturnPanel(frame, self.diagnostics)


def panel_from_records(frame: pd.DataFrame, rf_source: FactorSeries) -> ReturnPanel:
    """Build a panel from an in-memory frame with columns date, firm_id, ret, mktcap, naics."""
    frame = frame.copy()
    frame["date"] = pd.to_datetime(frame["date"])
    rf = rf_source.rf().reindex(pd.DatetimeIndex(frame["date"]))
    if rf.isna().any():
        raise UnknownDateInFactors(rf.index[rf.isna().to_numpy()][0].date())
    frame["exret"] = frame["ret"].to_numpy(dtype=float) - rf.to_numpy()
    frame["naics"] = frame["naics"].astype(str)
    return ReturnPanel(frame)


def ingest_returns(path: str | Path, rf_source: FactorSeries, strict: bool = False) -> ReturnPanel:
    """Read ``returns.csv`` and compute excess returns against ``rf_source``.

    Malformed rows are skipped and reported in ``panel.diagnostics``. With
    ``strict=True`` the first defect is raised instead. An optional ``exret``
    column is cross-checked against ``ret - rf`` at tolerance 1e-10.
    """
    path = Path(path)
    rf = {ts.date(): v for ts, v in rf_source.rf().items()}
    records, diagnostics = [], []

    def reject(err: DataError):
        if strict:
            raise err
        diagnostics.append(err)

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, RETURN_COLUMNS, path)
        has_exret = "exret" in (reader.fieldnames or ())
        for lineno, rec in enumerate(reader, start=2):
            try:
                day = parse_date(rec["date"] or "")
            except ValueError:
                reject(NonFiniteValue(lineno, "date", rec["date"]))
                continue
            ret = _finite(rec["ret"])
            if ret is None:
                reject(NonFiniteValue(lineno, "ret", rec["ret"]))
                continue
            cap = _finite(rec["mktcap"])
            if cap is None:
                reject(NonFiniteValue(lineno, "mktcap", rec["mktcap"]))
                continue
            if cap <= 0:
                reject(NonPositiveMarketCap(lineno, cap))
                continue
            naics = (rec["naics"] or "").strip()
            if not _NAICS_RE.match(naics):
                reject(InvalidNaics(lineno, naics))
                continue
            firm = (rec["firm_id"] or "").strip()
            if not firm:
                reject(NonFiniteValue(lineno, "firm_id", rec["firm_id"]))
                continue
            if day not in rf:
                reject(UnknownDateInFactors(day, lineno))
                continue
            exret = ret - rf[day]
            if has_exret and (rec["exret"] or "").strip():
                supplied = _finite(rec["exret"])
                if supplied is None:
                    reject(NonFiniteValue(lineno, "exret", rec["exret"]))
                    continue
                if abs(supplied - exret) > EXCESS_TOLERANCE:
                    reject(ExcessReturnMismatch(lineno, supplied, exret))
                    continue
            records.append((pd.Timestamp(day), firm, ret, exret, cap, naics))

    frame = pd.DataFrame(records, columns=["date", "firm_id", "ret", "exret", "mktcap", "naics"])
    frame["date"] = pd.to_datetime(frame["date"])
    return ReturnPanel(frame, tuple(diagnostics))


def write_returns(panel: ReturnPanel, path: str | Path) -> None:
    """Serialize in the ``returns.csv`` schema with round-trip float formatting."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RETURN_COLUMNS)
        for r in panel.frame.itertuples(index=False):
            w.writerow([r.date.date().isoformat(), r.firm_id, repr(float(r.ret)), repr(float(r.mktcap)), r.naics])


def apply_universe_filter(panel: ReturnPanel, min_cap: float = 10.0) -> ReturnPanel:
    """Keep firm-dates whose market cap (USD millions) is at least ``min_cap``."""
    keep = panel.frame["mktcap"].to_numpy() >= min_cap
    return panel.with_frame(panel.frame.loc[keep])


# ---------------------------------------------------------------------------
# resilience measures


@dataclass(frozen=True)
class ResilienceMeasure:
    family: str
    name: str
    naics_level: int
    direction: Direction
    entries: Mapping[str, float]

    def __post_init__(self):
        if self.family not in FAMILY_LEVELS:
            raise InvalidMeasure(f"unknown measure family {self.family!r}")
        if self.naics_level not in FAMILY_LEVELS[self.family]:
            raise InvalidMeasure(
                f"{self.family}:{self.name} cannot be published at {self.naics_level}-digit level"
            )
        direction = Direction(self.direction)
        expected = MEASURE_DIRECTIONS.get(self.name)
        if expected is not None and direction is not expected:
            raise InvalidMeasure(f"{self.name} must have direction {expected.value}")
        entries = {}
        for code, value in dict(self.entries).items():
            code = str(code)
            if len(code) != self.naics_level or not code.isdigit():
                raise InvalidMeasure(f"{self.key}: entry {code!r} is not a {self.naics_level}-digit code")
            value = float(value)
            if not math.isfinite(value):
                raise InvalidMeasure(f"{self.key}: non-finite value for {code}")
            entries[code] = value
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "entries", MappingProxyType(entries))

    @property
    def key(self) -> str:
        return f"{self.family}:{self.name}"

    def resilience(self, value: float) -> float:
        """Resilience on a percentage scale, higher meaning more resilient."""
        if self.direction is Direction.LOW_RES_IF_HIGH:
            return 100.0 - value
        return value

    def low_resilience_score(self, values):
        """Orientation in which larger numbers always mean less resilient."""
        if self.direction is Direction.LOW_RES_IF_HIGH:
            return values
        return -values


def load_resilience(path: str | Path) -> list[ResilienceMeasure]:
    path = Path(path)
    groups: dict[tuple, dict] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, RESILIENCE_COLUMNS, path)
        for lineno, rec in enumerate(reader, start=2):
            try:
                level = int(rec["naics_level"])
            except ValueError:
                raise InvalidMeasure(f"row {lineno}: bad naics_level {rec['naics_level']!r}") from None
            try:
                direction = Direction(rec["direction"].strip())
            except ValueError:
                raise InvalidMeasure(f"row {lineno}: bad direction {rec['direction']!r}") from None
            value = _finite(rec["value"])
            if value is None:
                raise NonFiniteValue(lineno, "value", rec["value"])
            key = (rec["family"].strip(), rec["name"].strip(), level, direction)
            entries = groups.setdefault(key, {})
            code = rec["naics"].strip()
            if code in entries:
                raise DuplicateObservation(f"row {lineno}: duplicate entry {code} for {key[0]}:{key[1]}")
            entries[code] = value
    return [ResilienceMeasure(f, n, lvl, d, e) for (f, n, lvl, d), e in groups.items()]


def write_resilience(measures: Iterable[ResilienceMeasure], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESILIENCE_COLUMNS)
        for m in measures:
            for code in sorted(m.entries):
                w.writerow([m.family, m.name, m.naics_level, m.direction.value, code, repr(m.entries[code])])


def select_measure(
    measures: Iterable[ResilienceMeasure], selector: str, naics_level: int | None = None
) -> ResilienceMeasure:
    """Pick one measure by ``FAMILY:name``; ambiguous NAICS levels must be disambiguated."""
    family, _, name = selector.partition(":")
    hits = [m for m in measures if m.family == family and m.name == name]
    if naics_level is not None:
        hits = [m for m in hits if m.naics_level == naics_level]
    if not hits:
        raise InvalidMeasure(f"no measure {selector!r}" + (f" at level {naics_level}" if naics_level else ""))
    if len(hits) > 1:
        levels = sorted(m.naics_level for m in hits)
        raise InvalidMeasure(f"{selector} is published at levels {levels}; pass an explicit naics_level")
    return hits[0]


# ---------------------------------------------------------------------------
# attention


@dataclass(frozen=True)
class AttentionSeries:
    values: pd.Series

    def __post_init__(self):
        s = self.values.copy()
        s.index = pd.DatetimeIndex(s.index, name="date")
        if s.index.has_duplicates:
            raise DuplicateObservation("attention series has duplicate dates")
        if (s < 0).any() or not np.isfinite(s.to_numpy(dtype=float)).all():
            raise DataError("attention values must be finite and nonnegative")
        object.__setattr__(self, "values", s.sort_index().astype(float))


def load_attention(path: str | Path) -> AttentionSeries:
    frame = pd.read_csv(path, dtype={"date": str}, float_precision="round_trip")
    _require_columns(frame.columns, ATTENTION_COLUMNS, path)
    return AttentionSeries(pd.Series(frame["value"].to_numpy(dtype=float), index=pd.to_datetime(frame["date"])))


# ---------------------------------------------------------------------------
# matching


@dataclass(frozen=True)
class MatchedPanel:
    """A return panel annotated with each firm's industry code and measure value.

    ``frame`` adds ``industry`` (NAICS truncated to the measure level) and
    ``value`` (the raw measure value) to the ReturnPanel columns.
    """

    frame: pd.DataFrame
    measure: ResilienceMeasure
    coverage: Mapping[str, int] = field(default_factory=dict)

    @property
    def dates(self) -> pd.DatetimeIndex:
        return pd.DatetimeIndex(sorted(self.frame["date"].unique()))

    @property
    def firms(self) -> list[str]:
        return sorted(self.frame["firm_id"].unique())

    def subset(self, mask) -> "MatchedPanel":
        return MatchedPanel(self.frame.loc[mask].reset_index(drop=True), self.measure, self.coverage)


def match_resilience(panel: ReturnPanel, measure: ResilienceMeasure) -> MatchedPanel:
    if not measure.entries:
        raise InvalidMeasure(f"{measure.key} has no entries")
    frame = panel.frame
    level = measure.naics_level
    short = frame["naics"].str.len() < level
    if short.any():
        r = frame.loc[short].iloc[0]
        raise NaicsTooShort(r.firm_id, r.naics, level)
    industry = frame["naics"].str.slice(0, level)
    values = industry.map(measure.entries)
    keep = values.notna().to_numpy()
    out = frame.loc[keep].copy()
    out["industry"] = industry[keep]
    out["value"] = values[keep].astype(float)
    out = out.reset_index(drop=True)
    coverage = {
        "firms_in": int(frame["firm_id"].nunique()),
        "firms_kept": int(out["firm_id"].nunique()),
        "industries_matched": int(out["industry"].nunique()),
        "rows_kept": int(len(out)),
    }
    return MatchedPanel(out, measure, MappingProxyType(coverage))
