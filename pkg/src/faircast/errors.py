"""Exception hierarchy shared across the package.

Every error raised by faircast derives from FaircastError so callers can
catch the whole family at pipeline boundaries. Validation errors carry
enough context (unit, date) to locate the offending input row.
"""

from __future__ import annotations


class FaircastError(Exception):
    """Base class for all faircast errors."""


# --- panel construction ---------------------------------------------------

class DecreasingCumulative(FaircastError):
    """Cumulative case count went down between consecutive days."""

    def __init__(self, unit: str, day: int, prev: float, curr: float):
        self.unit = unit
        self.day = day
        super().__init__(
            f"unit {unit}: cumulative cases decrease on day {day} ({prev} -> {curr})"
        )


class ZeroBaseline(FaircastError):
    """Baseline-window mean of trips is zero; mobility change undefined."""


class WindowOutOfRange(FaircastError):
    """Requested date window is not covered by the series."""


class InsufficientHistory(FaircastError):
    """A lagged day needed for a window average is missing from the series."""


class EmptyPanel(FaircastError):
    """No unit is present in all three input tables."""


class GapInSeries(FaircastError):
    """A unit's daily series has a missing day (never silently filled)."""

    def __init__(self, unit: str, day_iso: str):
        self.unit = unit
        self.day_iso = day_iso
        super().__init__(f"unit {unit}: missing day {day_iso}")


# --- ingest ---------------------------------------------------------------

class MalformedHeader(FaircastError):
    """CSV header row does not match the expected schema."""


class NonIntegerCount(FaircastError):
    """A cumulative case cell is not a non-negative integer."""

    def __init__(self, unit: str, date_iso: str, value: str):
        self.unit = unit
        self.date_iso = date_iso
        super().__init__(f"unit {unit}, date {date_iso}: non-integer count {value!r}")


class NegativeTrips(FaircastError):
    """A trips cell is negative."""


class UnknownSchema(FaircastError):
    """Mobility schema name is neither 'od' nor 'aggregated'."""


class OutOfRange(FaircastError):
    """A demographic value is outside its documented range."""


class MissingColumn(FaircastError):
    """A required demographics column is absent from the header."""


# --- model fitting --------------------------------------------------------

class InsufficientData(FaircastError):
    """Too few usable observations in the training window."""


class SingularDesign(FaircastError):
    """Design matrix condition estimate exceeds the singularity threshold."""


class SeriesTooShort(FaircastError):
    """Series is too short for the requested differencing or fit."""


class NoConvergedFit(FaircastError):
    """Every (p, q) cell of the order-selection grid failed."""


class HorizonExceedsExogLag(FaircastError):
    """Forecast horizon reaches past the available lagged exogenous values."""


# --- backtest / audit -----------------------------------------------------

class EmptySchedule(FaircastError):
    """Backtest schedule contains no origin dates."""


class ScheduleOutOfRange(FaircastError):
    """Schedule origins leave no room for training history or actuals."""


class NonFiniteValue(FaircastError):
    """An input value is NaN or infinite where a finite number is required."""


class DegenerateVariable(FaircastError):
    """A correlation input is constant; rank correlation undefined."""


# --- cli ------------------------------------------------------------------

class ConfigError(FaircastError):
    """Run configuration file is missing, malformed, or inconsistent."""
