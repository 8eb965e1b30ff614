import numpy as np
import pytest

from faircast.errors import (
    GapInSeries,
    MalformedHeader,
    MissingColumn,
    NegativeTrips,
    NonIntegerCount,
    OutOfRange,
    UnknownSchema,
)
from faircast.ingest import (
    parse_cases,
    parse_demographics,
    parse_mobility,
    write_cases_csv,
    write_demographics_csv,
    write_mobility_csv,
)
from faircast.panel import CaseSeries, MobilitySeries

from conftest import make_demo


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_parse_cases_happy(tmp_path):
    p = write(tmp_path, "cases.csv",
              "unit_id,2020-03-01,2020-03-02,2020-03-03,2020-03-04,2020-03-05\n"
              "a,0,1,1,2,5\n"
              "b,3,3,4,4,4\n")
    series, report = parse_cases(p)
    assert set(series) == {"a", "b"}
    assert series["a"].cumulative.tolist() == [0, 1, 1, 2, 5]
    assert report.rows_read == 2 and report.rows_rejected == 0
    assert report.rows_read - report.rows_rejected == len(series)


def test_parse_cases_non_integer(tmp_path):
    p = write(tmp_path, "cases.csv",
              "unit_id,2020-03-01,2020-03-02\na,1,abc\n")
    with pytest.raises(NonIntegerCount) as exc:
        parse_cases(p)
    assert exc.value.unit == "a" and exc.value.date_iso == "2020-03-02"


def test_parse_cases_duplicate_unit(tmp_path):
    p = write(tmp_path, "cases.csv",
              "unit_id,2020-03-01,2020-03-02\na,1,2\na,5,6\n")
    series, report = parse_cases(p)
    assert series["a"].cumulative.tolist() == [1, 2]
    assert report.rows_rejected == 1
    assert any("duplicate" in m for _, m in report.messages)


def test_parse_cases_header_gap(tmp_path):
    p = write(tmp_path, "cases.csv", "unit_id,2020-03-01,2020-03-03\na,1,2\n")
    with pytest.raises(GapInSeries):
        parse_cases(p)


def test_parse_cases_bad_header(tmp_path):
    p = write(tmp_path, "cases.csv", "fips,2020-03-01\na,1\n")
    with pytest.raises(MalformedHeader):
        parse_cases(p)


def test_parse_mobility_od_sums_destinations(tmp_path):
    p = write(tmp_path, "m.csv",
              "origin,destination,date,trips\n"
              "A,B,2020-03-01,10\n"
              "A,C,2020-03-01,5\n"
              "A,A,2020-03-01,2\n")
    series, _ = parse_mobility(p, "od")
    assert series["A"].trips.tolist() == [17.0]
    series2, _ = parse_mobility(p, "od", include_self=False)
    assert series2["A"].trips.tolist() == [15.0]


def test_parse_mobility_aggregated(tmp_path):
    p = write(tmp_path, "m.csv",
              "unit_id,date,trips\nA,2020-03-01,100\nA,2020-03-02,90.5\n")
    series, _ = parse_mobility(p, "aggregated")
    assert series["A"].trips.tolist() == [100.0, 90.5]


def test_parse_mobility_negative(tmp_path):
    p = write(tmp_path, "m.csv", "unit_id,date,trips\nA,2020-03-01,-1\n")
    with pytest.raises(NegativeTrips):
        parse_mobility(p, "aggregated")


def test_parse_mobility_unknown_schema(tmp_path):
    p = write(tmp_path, "m.csv", "unit_id,date,trips\nA,2020-03-01,1\n")
    with pytest.raises(UnknownSchema):
        parse_mobility(p, "weird")
    with pytest.raises(UnknownSchema):
        parse_mobility(p, "od")  # header mismatch


def test_parse_mobility_date_gap(tmp_path):
    p = write(tmp_path, "m.csv",
              "unit_id,date,trips\nA,2020-03-01,1\nA,2020-03-03,1\n")
    with pytest.raises(GapInSeries) as exc:
        parse_mobility(p, "aggregated")
    assert exc.value.unit == "A" and exc.value.day_iso == "2020-03-02"


def test_parse_mobility_duplicate_rejected(tmp_path):
    p = write(tmp_path, "m.csv",
              "unit_id,date,trips\nA,2020-03-01,5\nA,2020-03-01,9\n")
    series, report = parse_mobility(p, "aggregated")
    assert series["A"].trips.tolist() == [5.0]
    assert report.rows_rejected == 1


DEMO_HEADER = "unit_id,income,smartphone_pct,population,education_pct,nchs,median_age\n"


def test_parse_demographics_happy(tmp_path):
    p = write(tmp_path, "d.csv", DEMO_HEADER + "a,50000,85,10000,0.3,6,41.5\n")
    records, _ = parse_demographics(p)
    rec = records["a"]
    assert rec.nchs == 6
    assert rec.smartphone_pct == pytest.approx(0.85)  # percent scale detected
    assert rec.education_pct == pytest.approx(0.3)    # fraction preserved


def test_parse_demographics_nchs_out_of_range(tmp_path):
    p = write(tmp_path, "d.csv", DEMO_HEADER + "a,50000,0.8,10000,0.3,7,41.5\n")
    with pytest.raises(OutOfRange):
        parse_demographics(p)


def test_parse_demographics_missing_column(tmp_path):
    p = write(tmp_path, "d.csv",
              "unit_id,income,smartphone_pct,population,education_pct,nchs\n"
              "a,1,0.5,10,0.3,2\n")
    with pytest.raises(MissingColumn):
        parse_demographics(p)


def test_roundtrip_through_writers(tmp_path):
    rng = np.random.default_rng(0)
    cases = {u: CaseSeries(u, 18320, np.cumsum(rng.integers(0, 9, size=12)).astype(np.int64))
             for u in ("a", "b")}
    mobility = {u: MobilitySeries(u, 18320, rng.uniform(1, 500, size=12)) for u in ("a", "b")}
    demographics = {u: make_demo(u, income=rng.uniform(2e4, 9e4)) for u in ("a", "b")}

    write_cases_csv(tmp_path / "c.csv", cases)
    write_mobility_csv(tmp_path / "m.csv", mobility)
    write_demographics_csv(tmp_path / "d.csv", demographics)

    cases2, _ = parse_cases(tmp_path / "c.csv")
    mobility2, _ = parse_mobility(tmp_path / "m.csv", "aggregated")
    demographics2, _ = parse_demographics(tmp_path / "d.csv")

    for u in ("a", "b"):
        assert np.array_equal(cases2[u].cumulative, cases[u].cumulative)
        assert cases2[u].start_day == cases[u].start_day
        assert np.array_equal(mobility2[u].trips, mobility[u].trips)
        assert demographics2[u] == demographics[u]
