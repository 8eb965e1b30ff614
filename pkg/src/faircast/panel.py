"""Canonical unit-by-day panel and the feature transforms every model consumes.

A panel holds, per geographic unit, an aligned daily series of cumulative
confirmed cases and of mobility (raw trip volume plus its change ratio
against a pre-epidemic baseline), together with one static demographic
record. Series are stored as contiguous numpy arrays indexed from a start
day; missing days are an ingestion error, never interpolated.

All types are frozen and their arrays are marked read-only, so a panel can
be shared across parallel workers without copying.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .dates import iso_from_day
from .errors import (
    DecreasingCumulative,
    EmptyPanel,
    InsufficientHistory,
    OutOfRange,
    WindowOutOfRange,
    ZeroBaseline,
)

logger = logging.getLogger(__name__)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CaseSeries:
    """Daily cumulative confirmed cases for one unit, contiguous days."""

    unit: str
    start_day: int
    cumulative: np.ndarray  # int64, non-negative, non-decreasing

    def __post_init__(self):
        if not self.unit:
            raise OutOfRange("unit id must be non-empty")
        cum = np.asarray(self.cumulative, dtype=np.int64)
        if cum.ndim != 1 or cum.size == 0:
            raise OutOfRange(f"unit {self.unit}: cumulative series must be 1-d and non-empty")
        if cum[0] < 0:
            raise OutOfRange(f"unit {self.unit}: negative cumulative count")
        drops = np.nonzero(np.diff(cum) < 0)[0]
        if drops.size:
            i = int(drops[0])
            raise DecreasingCumulative(
                self.unit, self.start_day + i + 1, int(cum[i]), int(cum[i + 1])
            )
        object.__setattr__(self, "cumulative", _freeze(cum))

    def __len__(self) -> int:
        return self.cumulative.size

    @property
    def end_day(self) -> int:
        return self.start_day + len(self) - 1

    def clipped(self, start_day: int, end_day: int) -> "CaseSeries":
        lo = start_day - self.start_day
        hi = end_day - self.start_day + 1
        if lo < 0 or hi > len(self):
            raise WindowOutOfRange(
                f"unit {self.unit}: [{iso_from_day(start_day)}, {iso_from_day(end_day)}] "
                "outside case series"
            )
        return CaseSeries(self.unit, start_day, self.cumulative[lo:hi])


@dataclass(frozen=True)
class MobilitySeries:
    """Daily trip volume for one unit; `change` is trips over baseline mean."""

    unit: str
    start_day: int
    trips: np.ndarray             # float64, non-negative
    change: np.ndarray | None = None  # float64 > 0 once normalized

    def __post_init__(self):
        if not self.unit:
            raise OutOfRange("unit id must be non-empty")
        trips = np.asarray(self.trips, dtype=np.float64)
        if trips.ndim != 1 or trips.size == 0:
            raise OutOfRange(f"unit {self.unit}: trips series must be 1-d and non-empty")
        if np.any(trips < 0):
            raise OutOfRange(f"unit {self.unit}: negative trips")
        object.__setattr__(self, "trips", _freeze(trips))
        if self.change is not None:
            change = np.asarray(self.change, dtype=np.float64)
            if change.shape != trips.shape:
                raise OutOfRange(f"unit {self.unit}: change/trips length mismatch")
            object.__setattr__(self, "change", _freeze(change))

    def __len__(self) -> int:
        return self.trips.size

    @property
    def end_day(self) -> int:
        return self.start_day + len(self) - 1

    def clipped(self, start_day: int, end_day: int) -> "MobilitySeries":
        lo = start_day - self.start_day
        hi = end_day - self.start_day + 1
        if lo < 0 or hi > len(self):
            raise WindowOutOfRange(
                f"unit {self.unit}: [{iso_from_day(start_day)}, {iso_from_day(end_day)}] "
                "outside mobility series"
            )
        change = None if self.change is None else self.change[lo:hi]
        return MobilitySeries(self.unit, start_day, self.trips[lo:hi], change)


#: Demographic covariates the fairness audit correlates against, in the
#: column order of the monthly tables.
COVARIATES = ("income", "smartphone_pct", "population", "education_pct", "nchs", "median_age")


@dataclass(frozen=True)
class DemographicRecord:
    """Static county-level covariates."""

    unit: str
    income: float            # currency per household
    smartphone_pct: float    # fraction of households in [0, 1]
    population: float        # persons, > 0
    education_pct: float     # fraction with a bachelor's degree, [0, 1]
    nchs: int                # urban-rural code, 1 (most urban) .. 6 (most rural)
    median_age: float        # years

    def __post_init__(self):
        if not self.unit:
            raise OutOfRange("unit id must be non-empty")
        if self.nchs not in (1, 2, 3, 4, 5, 6):
            raise OutOfRange(f"unit {self.unit}: nchs {self.nchs} outside 1..6")
        if self.population <= 0:
            raise OutOfRange(f"unit {self.unit}: population {self.population} must be > 0")
        for name in ("smartphone_pct", "education_pct"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise OutOfRange(f"unit {self.unit}: {name} {v} outside [0, 1]")

    def covariate(self, name: str) -> float:
        if name not in COVARIATES:
            raise KeyError(name)
        return float(getattr(self, name))


@dataclass(frozen=True)
class PanelDataset:
    """Aligned per-unit case and mobility series plus demographics."""

    units: tuple[str, ...]
    cases: dict[str, CaseSeries]
    mobility: dict[str, MobilitySeries]
    demographics: dict[str, DemographicRecord]
    start_day: int
    end_day: int

    @property
    def n_days(self) -> int:
        return self.end_day - self.start_day + 1


# --- feature transforms -----------------------------------------------------

def derive_incident(cases: CaseSeries) -> np.ndarray:
    """Daily new cases from a cumulative series.

    Returns a float array aligned with `cases.cumulative`; index 0 is NaN
    because the first difference is undefined there. Monotonicity is already
    guaranteed by CaseSeries, so values are >= 0.
    """
    out = np.empty(len(cases), dtype=np.float64)
    out[0] = np.nan
    out[1:] = np.diff(cases.cumulative)
    return out


def normalize_mobility(
    series: MobilitySeries, baseline_start: int, baseline_end: int
) -> MobilitySeries:
    """Divide daily trips by their mean over the baseline window.

    The baseline window (inclusive day range) must lie within the series and
    have a positive mean.
    """
    if baseline_end < baseline_start:
        raise WindowOutOfRange("baseline window is empty")
    lo = baseline_start - series.start_day
    hi = baseline_end - series.start_day + 1
    if lo < 0 or hi > len(series):
        raise WindowOutOfRange(
            f"unit {series.unit}: baseline [{iso_from_day(baseline_start)}, "
            f"{iso_from_day(baseline_end)}] outside mobility series"
        )
    mean = float(series.trips[lo:hi].mean())
    if mean <= 0.0:
        raise ZeroBaseline(f"unit {series.unit}: baseline mean of trips is {mean}")
    return replace(series, change=series.trips / mean)


def lag_window_average(series: MobilitySeries, t: int, lag_from: int, lag_to: int) -> float:
    """Mean mobility change over days t-lag_to .. t-lag_from (inclusive)."""
    if series.change is None:
        raise ValueError("mobility series has no change values; normalize first")
    if not 1 <= lag_from <= lag_to:
        raise ValueError(f"bad lag band ({lag_from}, {lag_to})")
    lo = (t - lag_to) - series.start_day
    hi = (t - lag_from) - series.start_day + 1
    if lo < 0 or hi > len(series):
        raise InsufficientHistory(
            f"unit {series.unit}: lags {lag_from}-{lag_to} at {iso_from_day(t)} "
            "reach outside the series"
        )
    return float(series.change[lo:hi].mean())


def build_panel(
    cases: dict[str, CaseSeries],
    mobility: dict[str, MobilitySeries],
    demographics: dict[str, DemographicRecord],
) -> PanelDataset:
    """Intersect units, clip all series to the common date span.

    Units missing from any of the three inputs are dropped (count logged).
    Raises EmptyPanel when no unit or no day survives the intersection.
    """
    units = sorted(set(cases) & set(mobility) & set(demographics))
    n_dropped = len(set(cases) | set(mobility) | set(demographics)) - len(units)
    if n_dropped:
        logger.warning("build_panel: dropped %d unit(s) missing from some input", n_dropped)
    if not units:
        raise EmptyPanel("no unit present in all three inputs")

    start = max(
        max(cases[u].start_day for u in units),
        max(mobility[u].start_day for u in units),
    )
    end = min(
        min(cases[u].end_day for u in units),
        min(mobility[u].end_day for u in units),
    )
    if end < start:
        raise EmptyPanel("case and mobility series share no common days")

    return PanelDataset(
        units=tuple(units),
        cases={u: cases[u].clipped(start, end) for u in units},
        mobility={u: mobility[u].clipped(start, end) for u in units},
        demographics={u: demographics[u] for u in units},
        start_day=start,
        end_day=end,
    )
