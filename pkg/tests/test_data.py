import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resilab.data import (
    Direction,
    FactorSeries,
    ResilienceMeasure,
    apply_universe_filter,
    ingest_returns,
    load_attention,
    load_factors,
    load_resilience,
    match_resilience,
    panel_from_records,
    select_measure,
    write_factors,
    write_resilience,
    write_returns,
)
from resilab.errors import (
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

from _builders import flat_factors, kp_measure, random_factors


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_zero_rf_keeps_raw_return(tmp_path):
    f = flat_factors(["2020-02-24"], rf=0.0)
    p = _write(tmp_path / "r.csv", "date,firm_id,ret,mktcap,naics\n2020-02-24,F0001,0.002,150.0,334\n")
    panel = ingest_returns(p, f)
    obs = next(panel.observations())
    assert obs.excess_return == 0.002
    assert obs.naics == "334" and obs.market_cap == 150.0


def test_excess_is_ret_minus_rf(tmp_path):
    f = flat_factors(["2020-02-24"], rf=0.0001)
    p = _write(tmp_path / "r.csv", "date,firm_id,ret,mktcap,naics\n2020-02-24,A,0.010,50,211\n")
    assert next(ingest_returns(p, f).observations()).excess_return == pytest.approx(0.0099, abs=1e-15)


def _reference_parse(lines, rf):
    """Independent single-pass parser: returns (good rows, bad line numbers)."""
    good, bad = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        try:
            d, firm, ret, cap, naics = parts
            r = float(ret)
            c = float(cap)
            ok = (
                math.isfinite(r) and math.isfinite(c) and c > 0 and firm != ""
                and naics.isdigit() and 2 <= len(naics) <= 6 and d in rf
            )
        except ValueError:
            ok = False
        if ok:
            good.append((d, firm, r, r - rf[d], c, naics))
        else:
            bad.append(lineno)
    return good, bad


def test_thousand_rows_three_malformed(tmp_path):
    dates = pd.bdate_range("2020-01-02", periods=50)
    rng = np.random.default_rng(7)
    rfv = rng.uniform(0, 2e-4, len(dates))
    f = flat_factors(dates, rf=0.0)
    f = FactorSeries(f.frame.assign(rf=rfv))
    rf = {d.date().isoformat(): v for d, v in zip(dates, rfv)}
    lines = ["date,firm_id,ret,mktcap,naics"]
    for i in range(1000):
        d = dates[i % 50].date().isoformat()
        lines.append(f"{d},F{i // 50:03d},{rng.normal(0, 0.02)!r},{rng.uniform(5, 500)!r},{334000 + i % 7}")
    lines[101] = lines[101].replace(lines[101].split(",")[2], "nan")
    parts = lines[502].split(",")
    parts[3] = "-4.0"
    lines[502] = ",".join(parts)
    parts = lines[900].split(",")
    parts[4] = "33x"
    lines[900] = ",".join(parts)
    p = _write(tmp_path / "r.csv", "\n".join(lines) + "\n")

    panel = ingest_returns(p, f)
    good, bad = _reference_parse(lines, rf)
    assert len(panel) == 997 == len(good)
    assert sorted(e.row for e in panel.diagnostics) == bad == [102, 503, 901]
    kinds = {e.row: type(e) for e in panel.diagnostics}
    assert kinds[102] is NonFiniteValue and kinds[503] is NonPositiveMarketCap
    oracle = pd.DataFrame(good, columns=["date", "firm_id", "ret", "exret", "mktcap", "naics"])
    oracle["date"] = pd.to_datetime(oracle["date"])
    oracle = oracle.sort_values(["date", "firm_id"]).reset_index(drop=True)
    pd.testing.assert_frame_equal(panel.frame, oracle, check_exact=True)


@pytest.mark.parametrize(
    "row, err",
    [
        ("2020-02-24,A,inf,10,334", NonFiniteValue),
        ("2020-02-24,A,0.01,0,334", NonPositiveMarketCap),
        ("2020-03-01,A,0.01,10,334", UnknownDateInFactors),
        ("2020-02-24,A,0.01,10,3", InvalidNaics),
    ],
)
def test_strict_mode_raises(tmp_path, row, err):
    f = flat_factors(["2020-02-24"])
    p = _write(tmp_path / "r.csv", "date,firm_id,ret,mktcap,naics\n" + row + "\n")
    with pytest.raises(err):
        ingest_returns(p, f, strict=True)


def test_missing_column(tmp_path):
    p = _write(tmp_path / "r.csv", "date,firm_id,ret,naics\n2020-02-24,A,0.01,334\n")
    with pytest.raises(MissingColumn):
        ingest_returns(p, flat_factors(["2020-02-24"]))


def test_exret_mismatch_rejected(tmp_path):
    f = flat_factors(["2020-02-24"], rf=0.0001)
    text = "date,firm_id,ret,mktcap,naics,exret\n2020-02-24,A,0.01,10,334,0.0099\n2020-02-24,B,0.01,10,334,0.0098\n"
    panel = ingest_returns(_write(tmp_path / "r.csv", text), f)
    assert panel.firms == ["A"]
    assert isinstance(panel.diagnostics[0], ExcessReturnMismatch) and panel.diagnostics[0].row == 3


def test_duplicates_are_fatal(tmp_path):
    text = "date,firm_id,ret,mktcap,naics\n2020-02-24,A,0.01,10,334\n2020-02-24,A,0.02,10,334\n"
    with pytest.raises(DuplicateObservation):
        ingest_returns(_write(tmp_path / "r.csv", text), flat_factors(["2020-02-24"]))


def test_ingest_roundtrip_idempotent(tmp_path):
    dates = pd.bdate_range("2020-01-02", periods=30)
    f = random_factors(dates, seed=3, rf=1.3e-4)
    rng = np.random.default_rng(1)
    rows = [(d, f"X{i}", rng.normal(0, 0.03), rng.uniform(1, 900), "52" + str(i % 10)) for d in dates for i in range(12)]
    panel = panel_from_records(pd.DataFrame(rows, columns=["date", "firm_id", "ret", "mktcap", "naics"]), f)
    write_returns(panel, tmp_path / "a.csv")
    once = ingest_returns(tmp_path / "a.csv", f)
    write_returns(once, tmp_path / "b.csv")
    twice = ingest_returns(tmp_path / "b.csv", f)
    pd.testing.assert_frame_equal(panel.frame, once.frame, check_exact=True)
    pd.testing.assert_frame_equal(once.frame, twice.frame, check_exact=True)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_factor_roundtrip(tmp_path):
    f = random_factors(pd.bdate_range("2019-01-02", periods=40), seed=5, rf=1e-4)
    write_factors(f, tmp_path / "f.csv")
    pd.testing.assert_frame_equal(load_factors(tmp_path / "f.csv").frame, f.frame, check_exact=True, check_freq=False)


def _cap_panel(caps):
    dates = pd.bdate_range("2020-01-02", periods=len(caps[0]))
    rows = [(d, f"F{i}", 0.0, c, "334") for i, series in enumerate(caps) for d, c in zip(dates, series)]
    return panel_from_records(pd.DataFrame(rows, columns=["date", "firm_id", "ret", "mktcap", "naics"]), flat_factors(dates))


def test_filter_drops_small_firm_entirely():
    panel = _cap_panel([[9.99] * 5, [10.0] * 5, [250.0] * 5])
    kept = apply_universe_filter(panel, 10)
    assert kept.firms == ["F1", "F2"]


def test_filter_zero_is_identity():
    panel = _cap_panel([[0.5, 3.0, 9.0], [10.0, 11.0, 12.0]])
    pd.testing.assert_frame_equal(apply_universe_filter(panel, 0).frame, panel.frame)


def test_filter_matches_row_scan():
    rng = np.random.default_rng(11)
    panel = _cap_panel([list(rng.uniform(1, 30, 20)) for _ in range(15)])
    kept = apply_universe_filter(panel, 10)
    expected = [(r.date, r.firm_id) for r in panel.frame.itertuples() if r.mktcap >= 10]
    assert list(zip(kept.frame["date"], kept.frame["firm_id"])) == expected


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.01, 100), min_size=6, max_size=6), st.floats(0, 60), st.floats(0, 60))
def test_filter_monotone(caps, a, b):
    panel = _cap_panel([caps[:3], caps[3:]])
    lo, hi = sorted((a, b))
    keep_lo = set(map(tuple, apply_universe_filter(panel, lo).frame[["date", "firm_id"]].to_numpy()))
    keep_hi = set(map(tuple, apply_universe_filter(panel, hi).frame[["date", "firm_id"]].to_numpy()))
    assert keep_hi <= keep_lo


def test_match_prefix_truncation():
    panel = panel_from_records(
        pd.DataFrame([("2020-02-24", "F", 0.01, 100.0, "334413")], columns=["date", "firm_id", "ret", "mktcap", "naics"]),
        flat_factors(["2020-02-24"]),
    )
    m = match_resilience(panel, kp_measure({"334": 13.0}))
    assert m.frame.loc[0, "industry"] == "334" and m.frame.loc[0, "value"] == 13.0


def test_match_naics_too_short():
    panel = panel_from_records(
        pd.DataFrame([("2020-02-24", "F", 0.01, 100.0, "52")], columns=["date", "firm_id", "ret", "mktcap", "naics"]),
        flat_factors(["2020-02-24"]),
    )
    with pytest.raises(NaicsTooShort):
        match_resilience(panel, kp_measure({"522": 40.0}))


def test_match_against_set_oracle():
    rng = np.random.default_rng(4)
    codes = [str(c) for c in rng.choice(np.arange(100, 1000), 20, replace=False)]
    table = {c: float(v) for c, v in zip(codes[:10], rng.uniform(0, 100, 10))}
    firm_codes = {f"F{i:02d}": codes[rng.integers(0, 20)] + f"{rng.integers(0, 1000):03d}" for i in range(50)}
    dates = pd.bdate_range("2020-02-24", periods=3)
    rows = [(d, f, 0.001, 50.0, n) for d in dates for f, n in firm_codes.items()]
    panel = panel_from_records(pd.DataFrame(rows, columns=["date", "firm_id", "ret", "mktcap", "naics"]), flat_factors(dates))
    m = match_resilience(panel, kp_measure(table))
    oracle = set(firm_codes) & {f for f, n in firm_codes.items() if n[:3] in table}
    assert set(m.firms) == oracle
    assert m.coverage["firms_kept"] == len(oracle)
    assert m.coverage["industries_matched"] == len({firm_codes[f][:3] for f in oracle})
    # returns and caps untouched
    merged = m.frame.merge(panel.frame, on=["date", "firm_id"], suffixes=("", "_p"))
    assert (merged["exret"] == merged["exret_p"]).all() and (merged["mktcap"] == merged["mktcap_p"]).all()


def test_measure_validation():
    with pytest.raises(InvalidMeasure):
        ResilienceMeasure("HLR", "workplace", 3, Direction.LOW_RES_IF_HIGH, {"334": 1.0})
    with pytest.raises(InvalidMeasure):
        ResilienceMeasure("KP", "affected_share", 3, Direction.HIGH_RES_IF_HIGH, {"334": 1.0})
    with pytest.raises(InvalidMeasure):
        ResilienceMeasure("KP", "affected_share", 3, Direction.LOW_RES_IF_HIGH, {"3341": 1.0})
    m = ResilienceMeasure("DN", "teleworkable_manual_wage", 2, "high_res_if_high", {"52": 80.0})
    assert m.resilience(80.0) == 80.0
    assert kp_measure({"211": 30.0}).resilience(30.0) == 70.0


def test_resilience_file_roundtrip_and_selection(tmp_path):
    a = ResilienceMeasure("DN", "teleworkable_manual_wage", 2, "high_res_if_high", {"52": 80.0, "21": 10.0})
    b = ResilienceMeasure("DN", "teleworkable_manual_wage", 3, "high_res_if_high", {"522": 81.5})
    c = kp_measure({"334": 13.0, "211": 30.0})
    write_resilience([a, b, c], tmp_path / "m.csv")
    loaded = load_resilience(tmp_path / "m.csv")
    assert {m.key for m in loaded} == {a.key, c.key}
    with pytest.raises(InvalidMeasure):
        select_measure(loaded, "DN:teleworkable_manual_wage")
    got = select_measure(loaded, "DN:teleworkable_manual_wage", naics_level=3)
    assert dict(got.entries) == {"522": 81.5}
    assert dict(select_measure(loaded, "KP:affected_share").entries) == dict(c.entries)


def test_attention_rejects_duplicates(tmp_path):
    _write(tmp_path / "a.csv", "date,value\n2020-01-02,1\n2020-01-02,2\n")
    with pytest.raises(DuplicateObservation):
        load_attention(tmp_path / "a.csv")
    _write(tmp_path / "b.csv", "date,value\n2020-01-03,1\n2020-01-02,2\n")
    assert list(load_attention(tmp_path / "b.csv").values) == [2.0, 1.0]
