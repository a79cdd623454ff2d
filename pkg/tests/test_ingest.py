import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CLIMATE_HEADER, CLIMATE_VALUES, LPIS_HEADER, SOC_HEADER, climate_row
from soc_cate.core import ClimateRecord, FieldYearRecord, SocRecord
from soc_cate.exceptions import (
    DuplicateKeyError,
    EmptyResultError,
    InvalidConfigError,
    MalformedRowError,
    MissingClimateYearError,
    MissingColumnError,
)
from soc_cate.ingest import (
    CONTROL,
    CROP_CHANGED,
    EXCLUDED,
    MISSING_CLIMATE,
    MISSING_SOC,
    MISSING_WINDOW_YEAR,
    OUTSIDE_TOP_K,
    TREATED,
    TreatmentWindow,
    aggregate_climate,
    assemble,
    derive_treatment,
    parse_climate,
    parse_lpis,
    parse_soc,
)

W = TreatmentWindow((2020, 2021))


# ---------------------------------------------------------------- parsing


def test_parse_lpis_row(write_csv):
    path = write_csv("lpis.csv", LPIS_HEADER, ["F1,2020,PP,1,"])
    assert parse_lpis(path) == [FieldYearRecord("F1", 2020, "PP", True, None)]


def test_parse_lpis_accepts_crlf(write_csv):
    path = write_csv("lpis.csv", LPIS_HEADER, ["F1,2020,PP,0,G1", "F1,2021,PP,1,G1"], newline="\r\n")
    recs = parse_lpis(path)
    assert [r.eco_enrolled for r in recs] == [False, True]
    assert recs[0].geometry_ref == "G1"


def test_parse_lpis_duplicate_key(write_csv):
    path = write_csv("lpis.csv", LPIS_HEADER, ["F1,2020,PP,1,", "F1,2020,SP,0,"])
    with pytest.raises(DuplicateKeyError) as info:
        parse_lpis(path)
    assert info.value.line == 3


def test_parse_lpis_rejects_eco_2(write_csv):
    path = write_csv("lpis.csv", LPIS_HEADER, ["F1,2020,PP,2,"])
    with pytest.raises(MalformedRowError, match="line 2"):
        parse_lpis(path)


def test_parse_lpis_missing_column(write_csv):
    path = write_csv("lpis.csv", "field_id,year,crop_code,geometry_ref", ["F1,2020,PP,"])
    with pytest.raises(MissingColumnError, match="eco"):
        parse_lpis(path)


def test_parse_lpis_year_range(write_csv):
    path = write_csv("lpis.csv", LPIS_HEADER, ["F1,2016,PP,1,"])
    with pytest.raises(MalformedRowError, match="2016"):
        parse_lpis(path)
    assert parse_lpis(path, allow_any_year=True)[0].year == 2016


def test_parse_lpis_wrong_field_count(write_csv):
    path = write_csv("lpis.csv", LPIS_HEADER, ["F1,2020,PP,1"])
    with pytest.raises(MalformedRowError):
        parse_lpis(path)


def test_parse_climate_row(write_csv):
    path = write_csv("climate.csv", CLIMATE_HEADER, [climate_row("F1", 2020)])
    assert parse_climate(path) == [ClimateRecord("F1", 2020, *CLIMATE_VALUES)]


def test_parse_climate_missing_runoff(write_csv):
    header = CLIMATE_HEADER.replace(",runoff", "")
    vals = list(CLIMATE_VALUES)
    del vals[7]
    path = write_csv("climate.csv", header, [climate_row("F1", 2020, vals)])
    with pytest.raises(MissingColumnError, match="runoff"):
        parse_climate(path)


@pytest.mark.parametrize("index,value", [(2, 1.7), (6, -0.1), (8, -1e-3), (0, float("nan"))])
def test_parse_climate_out_of_domain(write_csv, index, value):
    vals = list(CLIMATE_VALUES)
    vals[index] = value
    path = write_csv("climate.csv", CLIMATE_HEADER, [climate_row("F1", 2020, vals)])
    with pytest.raises(MalformedRowError):
        parse_climate(path)


def test_parse_soc(write_csv):
    path = write_csv("soc.csv", SOC_HEADER, ["F1,2.4"])
    assert parse_soc(path) == [SocRecord("F1", 2.4)]


def test_parse_soc_negative(write_csv):
    path = write_csv("soc.csv", SOC_HEADER, ["F1,-0.5"])
    with pytest.raises(MalformedRowError):
        parse_soc(path)


def test_parse_soc_duplicate(write_csv):
    path = write_csv("soc.csv", SOC_HEADER, ["F1,2.4", "F1,2.5"])
    with pytest.raises(DuplicateKeyError):
        parse_soc(path)


def test_parse_soc_thousands_separator_rejected(write_csv):
    path = write_csv("soc.csv", SOC_HEADER, ['F1,"1,5"'])
    with pytest.raises(MalformedRowError):
        parse_soc(path)


# ---------------------------------------------------------------- treatment


def lp(field, year, crop="PP", eco=True):
    return FieldYearRecord(field, year, crop, eco)


def test_treated_when_enrolled_every_window_year():
    out = derive_treatment([lp("F1", 2020), lp("F1", 2021)], W)
    assert out["F1"].status == TREATED


def test_control_when_enrolled_only_one_year():
    out = derive_treatment([lp("F2", 2020, eco=False), lp("F2", 2021)], W)
    assert out["F2"].status == CONTROL


def test_excluded_when_window_year_missing():
    out = derive_treatment([lp("F3", 2021), lp("F3", 2019)], W)
    assert out["F3"].status == EXCLUDED
    assert out["F3"].reason == MISSING_WINDOW_YEAR


@given(st.lists(st.booleans(), min_size=2, max_size=2), st.integers(0, 1))
def test_treatment_is_monotone(eco, flip):
    before = derive_treatment([lp("F", 2020, eco=eco[0]), lp("F", 2021, eco=eco[1])], W)["F"]
    eco2 = list(eco)
    eco2[flip] = True
    after = derive_treatment([lp("F", 2020, eco=eco2[0]), lp("F", 2021, eco=eco2[1])], W)["F"]
    assert not (before.status == TREATED and after.status == CONTROL)


# ---------------------------------------------------------------- climate


def cl(field, year, values):
    return ClimateRecord(field, year, *values)


def test_aggregate_mean_of_two_years():
    a = list(CLIMATE_VALUES)
    b = list(CLIMATE_VALUES)
    a[8], b[8] = 2.0, 4.0
    out = aggregate_climate([cl("F1", 2020, a), cl("F1", 2021, b)], W)
    assert out["F1"][8] == 3.0


def test_aggregate_single_year_window_is_identity():
    out = aggregate_climate([cl("F1", 2021, CLIMATE_VALUES), cl("F1", 2020, [0.5] * 9)], TreatmentWindow((2021,)))
    assert out["F1"] == CLIMATE_VALUES


@given(st.lists(st.floats(0.0, 1.0), min_size=9, max_size=9))
def test_aggregate_constant_is_identity(values):
    out = aggregate_climate([cl("F1", 2020, values), cl("F1", 2021, values)], W)
    assert out["F1"] == tuple(values)


def test_aggregate_missing_year():
    with pytest.raises(MissingClimateYearError):
        aggregate_climate([cl("F1", 2020, CLIMATE_VALUES)], W)


def test_window_validation():
    with pytest.raises(InvalidConfigError):
        TreatmentWindow(())
    with pytest.raises(InvalidConfigError):
        TreatmentWindow((2021, 2020))
    assert TreatmentWindow.parse("2020,2021").years == (2020, 2021)


# ---------------------------------------------------------------- assemble


def dataset():
    """Fields covering every exclusion path plus retained PP/SP/WW fields."""
    lpis, climate, soc = [], [], []

    def add(field, crops, ecos, with_climate=True, with_soc=True, years=(2020, 2021)):
        for y, c, e in zip(years, crops, ecos):
            lpis.append(FieldYearRecord(field, y, c, bool(e), f"g-{field}"))
        if with_climate:
            climate.extend(cl(field, y, CLIMATE_VALUES) for y in (2020, 2021))
        if with_soc:
            soc.append(SocRecord(field, 2.0))

    add("F1", ("PP", "PP"), (1, 1))
    add("F2", ("PP", "PP"), (0, 1))
    add("F3", ("PP", "PP"), (0, 0))
    add("F4", ("PP", "WW"), (1, 1))
    add("F5", ("SP", "SP"), (1, 1))
    add("F6", ("SP", "SP"), (0, 0))
    add("F7", ("WW", "WW"), (1, 0))
    add("F8", ("BA", "BA"), (1, 1))
    add("F9", ("PP",), (1,), years=(2021,))
    add("F10", ("SP", "SP"), (1, 1), with_climate=False)
    add("F11", ("WW", "WW"), (1, 1), with_soc=False)
    return lpis, climate, soc


def test_assemble_units_and_report():
    lpis, climate, soc = dataset()
    units, vocab, report = assemble(lpis, climate, soc, W, 3)
    assert vocab.codes == ("PP", "SP", "WW")
    by_id = {u.field_id: u for u in units}
    assert by_id["F1"].modifiers_x == (1, 0, 0) and by_id["F1"].treatment == 1
    assert by_id["F2"].treatment == 0
    assert [u.field_id for u in units] == sorted(by_id)
    assert report.excluded_fields == {
        "F4": CROP_CHANGED,
        "F8": OUTSIDE_TOP_K,
        "F9": MISSING_WINDOW_YEAR,
        "F10": MISSING_CLIMATE,
        "F11": MISSING_SOC,
    }
    assert report.n == 6 and report.n_treated == 2 and report.n_control == 4
    assert report.per_segment["PP"] == {"n": 3, "n_treated": 1, "n_control": 2}


def test_assemble_conservation():
    lpis, climate, soc = dataset()
    _, _, report = assemble(lpis, climate, soc, W, 3)
    assert report.n_excluded + report.n == len({r.field_id for r in lpis})


def test_degenerate_vocabulary():
    lpis = [FieldYearRecord(f"F{i}", y, "PP", i % 2 == 0) for i in range(4) for y in (2020, 2021)]
    climate = [cl(f"F{i}", y, CLIMATE_VALUES) for i in range(4) for y in (2020, 2021)]
    soc = [SocRecord(f"F{i}", 1.0) for i in range(4)]
    units, vocab, _ = assemble(lpis, climate, soc, W, 3)
    assert len(vocab) == 1
    assert all(u.modifiers_x == (1,) for u in units)


def test_assemble_empty_result():
    lpis = [FieldYearRecord("F1", 2020, "PP", True), FieldYearRecord("F1", 2021, "SP", True)]
    with pytest.raises(EmptyResultError):
        assemble(lpis, [], [], W, 3)


def test_window_outside_data_years():
    lpis, climate, soc = dataset()
    with pytest.raises(InvalidConfigError):
        assemble(lpis, climate, soc, TreatmentWindow((2021, 2022)), 3)


@settings(max_examples=25, deadline=None)
@given(st.randoms())
def test_assemble_independent_of_row_order(rnd):
    lpis, climate, soc = dataset()
    ref = assemble(lpis, climate, soc, W, 3)
    for seq in (lpis, climate, soc):
        rnd.shuffle(seq)
    got = assemble(lpis, climate, soc, W, 3)
    assert got[0] == ref[0] and got[1] == ref[1]
    assert got[2].to_dict() == ref[2].to_dict()


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_conservation_on_random_panels(data):
    n_fields = data.draw(st.integers(1, 12))
    crops = st.sampled_from(["PP", "SP", "WW", "BA"])
    lpis, climate, soc = [], [], []
    for i in range(n_fields):
        f = f"F{i}"
        for y in data.draw(st.sets(st.sampled_from([2019, 2020, 2021]), min_size=1)):
            lpis.append(FieldYearRecord(f, y, data.draw(crops), data.draw(st.booleans())))
            if data.draw(st.booleans()):
                climate.append(cl(f, y, CLIMATE_VALUES))
        if data.draw(st.booleans()):
            soc.append(SocRecord(f, 1.0))
    try:
        units, _, report = assemble(lpis, climate, soc, W, data.draw(st.integers(1, 3)))
    except (EmptyResultError, InvalidConfigError):
        return
    assert report.n_excluded + report.n == n_fields
