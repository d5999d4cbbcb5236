"""Run configuration: flat ``key = value`` files with ``#`` comments.

Command-line flags override file values. Unknown keys are rejected and every
referenced input file must exist when the configuration is loaded.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from datetime import date
from pathlib import Path
from typing import Any

from .errors import ConfigError

PATH_KEYS = ("returns", "factors", "resilience", "attention", "surface")


def _split(value: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in value.split(",") if v.strip())


@dataclass(frozen=True)
class RunConfig:
    returns: Path | None = None
    factors: Path | None = None
    resilience: Path | None = None
    attention: Path | None = None
    surface: Path | None = None
    measure: str = "KP:affected_share"
    naics_level: int | None = None
    models: tuple[str, ...] = ("capm", "ff3", "ff4", "ff5", "ff6")
    window_start: date = date(2020, 2, 24)
    window_end: date = date(2020, 3, 20)
    estimation_start: date = date(2019, 1, 1)
    estimation_end: date = date(2019, 12, 31)
    period_start: date = date(2020, 1, 1)
    period_end: date = date(2020, 3, 31)
    cumulation: str | None = None
    tie_rule: str = "high"
    min_obs: int = 127
    min_cap: float = 10.0
    maturities: tuple[int, ...] = (30, 91, 365, 730)
    top_n: int = 25
    years: tuple[int, ...] = ()
    ids: tuple[str, ...] = ()
    market_id: str = "MARKET"
    out: Path = Path("out")
    seed: int = 42
    quiet: bool = False
    strict: bool = False

    def check_files(self) -> "RunConfig":
        for key in PATH_KEYS:
            p = getattr(self, key)
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"{key}: file not found: {p}")
        return self

    def require(self, *keys: str) -> None:
        missing = [k for k in keys if getattr(self, k) is None]
        if missing:
            raise ConfigError(f"missing required input(s): {', '.join(missing)}")

    @property
    def window(self) -> tuple[date, date]:
        return self.window_start, self.window_end

    @property
    def estimation_window(self) -> tuple[date, date]:
        return self.estimation_start, self.estimation_end

    @property
    def period(self) -> tuple[date, date]:
        return self.period_start, self.period_end


_FIELDS = {f.name: f for f in fields(RunConfig)}


def coerce(key: str, raw: Any) -> Any:
    """Convert a textual value to the type of RunConfig field ``key``."""
    if key not in _FIELDS:
        raise ConfigError(f"unknown configuration key {key!r}")
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if key in PATH_KEYS or key == "out":
            return Path(raw)
        if key in ("naics_level", "min_obs", "top_n", "seed"):
            return int(raw)
        if key == "min_cap":
            return float(raw)
        if key in ("quiet", "strict"):
            return raw.lower() in ("1", "true", "yes", "on")
        if key.endswith(("_start", "_end")):
            return date.fromisoformat(raw)
        if key in ("maturities", "years"):
            return tuple(int(v) for v in _split(raw))
        if key in ("models", "ids"):
            return tuple(v.lower() if key == "models" else v for v in _split(raw))
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})") from None
    return raw


def parse_config_text(text: str) -> dict[str, Any]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        values[key] = coerce(key, value)
    return values


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    values: dict[str, Any] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        values.update(parse_config_text(p.read_text(encoding="utf-8")))
    for key, raw in (overrides or {}).items():
        if raw is not None:
            values[key] = coerce(key, raw)
    return replace(RunConfig(), **values).check_files()
