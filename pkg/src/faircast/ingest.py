"""Strict CSV parsers for the three input file families.

Formats (UTF-8, comma-delimited, mandatory header, ISO-8601 dates):

* cases.csv         wide: ``unit_id,<date1>,<date2>,...`` with cumulative ints
* mobility.csv      od: ``origin,destination,date,trips``
                    aggregated: ``unit_id,date,trips``
* demographics.csv  ``unit_id,income,smartphone_pct,population,education_pct,nchs,median_age``

Validation is deliberately unforgiving: bad cells raise, missing days raise.
Only duplicate keys are downgraded to row rejection (first occurrence wins),
because they are recoverable without guessing. The writers mirror the
parsers so a generated dataset round-trips exactly.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dates import day_from_date, iso_from_day
from .errors import (
    GapInSeries,
    MalformedHeader,
    MissingColumn,
    NegativeTrips,
    NonIntegerCount,
    OutOfRange,
    UnknownSchema,
)
from .panel import CaseSeries, DemographicRecord, MobilitySeries

DEMOGRAPHIC_COLUMNS = (
    "income", "smartphone_pct", "population", "education_pct", "nchs", "median_age",
)
_PERCENT_COLUMNS = ("smartphone_pct", "education_pct")


@dataclass
class IngestReport:
    """What a parser saw: row counts plus (severity, text) messages."""

    rows_read: int = 0
    rows_rejected: int = 0
    units_dropped: int = 0
    messages: list[tuple[str, str]] = field(default_factory=list)

    def warn(self, text: str) -> None:
        self.messages.append(("warning", text))


def _parse_iso_date(s: str, where: str) -> int:
    try:
        return day_from_date(dt.date.fromisoformat(s.strip()))
    except ValueError:
        raise MalformedHeader(f"{where}: {s!r} is not an ISO-8601 date") from None


def _read_rows(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedHeader(f"{path}: file is empty") from None
        return [h.strip() for h in header], [row for row in reader if row]


def parse_cases(path: str | Path) -> tuple[dict[str, CaseSeries], IngestReport]:
    """Read a wide cumulative-by-date cases file, one series per row."""
    header, rows = _read_rows(path)
    if not header or header[0] != "unit_id" or len(header) < 2:
        raise MalformedHeader(f"{path}: expected 'unit_id,<date>,...', got {header[:3]}")
    days = [_parse_iso_date(h, f"{path} header column {i + 1}") for i, h in enumerate(header[1:])]
    for prev, curr in zip(days, days[1:]):
        if curr != prev + 1:
            raise GapInSeries("*", iso_from_day(prev + 1))

    report = IngestReport()
    out: dict[str, CaseSeries] = {}
    for row in rows:
        report.rows_read += 1
        unit = row[0].strip()
        if unit in out:
            report.rows_rejected += 1
            report.warn(f"duplicate unit {unit}: row rejected")
            continue
        if len(row) != len(header):
            raise MalformedHeader(f"{path}: unit {unit} has {len(row) - 1} cells, expected {len(days)}")
        values = np.empty(len(days), dtype=np.int64)
        for j, cell in enumerate(row[1:]):
            try:
                values[j] = int(cell)
            except ValueError:
                raise NonIntegerCount(unit, iso_from_day(days[j]), cell) from None
        out[unit] = CaseSeries(unit, days[0], values)
    return out, report


def parse_mobility(
    path: str | Path, schema: str, include_self: bool = True
) -> tuple[dict[str, MobilitySeries], IngestReport]:
    """Read daily trip volumes.

    ``od`` rows are summed over destinations per (origin, date); pass
    ``include_self=False`` to drop within-unit trips. ``aggregated`` rows are
    read directly. Each unit's days must be contiguous once assembled.
    """
    if schema not in ("od", "aggregated"):
        raise UnknownSchema(f"mobility schema must be 'od' or 'aggregated', got {schema!r}")
    header, rows = _read_rows(path)
    expected = ["origin", "destination", "date", "trips"] if schema == "od" else ["unit_id", "date", "trips"]
    if header != expected:
        raise UnknownSchema(f"{path}: header {header} does not match {schema} schema {expected}")

    report = IngestReport()
    per_unit: dict[str, dict[int, float]] = {}
    for i, row in enumerate(rows, start=2):
        report.rows_read += 1
        if len(row) != len(expected):
            raise MalformedHeader(f"{path} line {i}: expected {len(expected)} cells")
        if schema == "od":
            unit, dest, date_s, trips_s = (c.strip() for c in row)
            if not include_self and dest == unit:
                continue
        else:
            unit, date_s, trips_s = (c.strip() for c in row)
        day = _parse_iso_date(date_s, f"{path} line {i}")
        try:
            trips = float(trips_s)
        except ValueError:
            raise OutOfRange(f"{path} line {i}: trips {trips_s!r} is not a number") from None
        if not np.isfinite(trips) or trips < 0:
            raise NegativeTrips(f"unit {unit}, date {date_s}: trips {trips_s}")
        bucket = per_unit.setdefault(unit, {})
        if schema == "aggregated" and day in bucket:
            report.rows_rejected += 1
            report.warn(f"duplicate (unit, date) ({unit}, {date_s}): row rejected")
            continue
        bucket[day] = bucket.get(day, 0.0) + trips

    out: dict[str, MobilitySeries] = {}
    for unit, by_day in per_unit.items():
        days = sorted(by_day)
        for prev, curr in zip(days, days[1:]):
            if curr != prev + 1:
                raise GapInSeries(unit, iso_from_day(prev + 1))
        out[unit] = MobilitySeries(unit, days[0], np.array([by_day[d] for d in days]))
    return out, report


def parse_demographics(path: str | Path) -> tuple[dict[str, DemographicRecord], IngestReport]:
    """Read one demographic record per unit.

    Percent columns are accepted on either a 0-1 or 0-100 scale (values > 1
    are treated as percentages and divided by 100).
    """
    header, rows = _read_rows(path)
    if not header or header[0] != "unit_id":
        raise MalformedHeader(f"{path}: first column must be unit_id, got {header[:1]}")
    col = {name: i for i, name in enumerate(header)}
    for name in DEMOGRAPHIC_COLUMNS:
        if name not in col:
            raise MissingColumn(f"{path}: column {name!r} missing from header")

    report = IngestReport()
    out: dict[str, DemographicRecord] = {}
    for i, row in enumerate(rows, start=2):
        report.rows_read += 1
        if len(row) != len(header):
            raise MalformedHeader(f"{path} line {i}: expected {len(header)} cells")
        unit = row[col["unit_id"]].strip()
        if unit in out:
            report.rows_rejected += 1
            report.warn(f"duplicate unit {unit}: row rejected")
            continue
        values: dict[str, float] = {}
        for name in DEMOGRAPHIC_COLUMNS:
            cell = row[col[name]].strip()
            try:
                values[name] = float(cell)
            except ValueError:
                raise OutOfRange(f"unit {unit}: {name} {cell!r} is not a number") from None
        for name in _PERCENT_COLUMNS:
            if values[name] > 1.0:
                values[name] /= 100.0
        nchs = values.pop("nchs")
        if nchs != int(nchs):
            raise OutOfRange(f"unit {unit}: nchs {nchs} is not an integer")
        out[unit] = DemographicRecord(unit=unit, nchs=int(nchs), **values)
    return out, report


# --- writers (round-trip counterparts used by the synthetic generator) ------

def _fmt(x: float) -> str:
    # repr of a float round-trips exactly through float()
    return repr(float(x))


def write_cases_csv(path: str | Path, cases: dict[str, CaseSeries]) -> None:
    units = sorted(cases)
    if not units:
        raise ValueError("no case series to write")
    first = cases[units[0]]
    days = [first.start_day + i for i in range(len(first))]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["unit_id"] + [iso_from_day(d) for d in days])
        for unit in units:
            s = cases[unit]
            if s.start_day != first.start_day or len(s) != len(first):
                raise ValueError(f"unit {unit}: all series must share one date span")
            w.writerow([unit] + [int(v) for v in s.cumulative])


def write_mobility_csv(path: str | Path, mobility: dict[str, MobilitySeries]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["unit_id", "date", "trips"])
        for unit in sorted(mobility):
            s = mobility[unit]
            for i in range(len(s)):
                w.writerow([unit, iso_from_day(s.start_day + i), _fmt(s.trips[i])])


def write_demographics_csv(path: str | Path, demographics: dict[str, DemographicRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["unit_id"] + list(DEMOGRAPHIC_COLUMNS))
        for unit in sorted(demographics):
            r = demographics[unit]
            w.writerow(
                [unit, _fmt(r.income), _fmt(r.smartphone_pct), _fmt(r.population),
                 _fmt(r.education_pct), str(r.nchs), _fmt(r.median_age)]
            )
