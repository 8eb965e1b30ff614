"""Rolling-origin evaluation for both model families.

For every (unit, origin) pair in the schedule the harness fits the model on
the window ending at the origin, forecasts 1 and 7 days ahead, and pairs
the predictions with ground-truth actuals from the panel. The evaluation
target is daily new cases: the 1-day actual is the next day's new cases,
the 7-day actual is the total new cases over the following week
(configurable to cumulative counts).

Per-(unit, origin) fit failures are logged and skipped, never fatal. Units
are processed as independent tasks (optionally across a thread pool) and
results are merged with a final sort, so output is identical for any worker
count.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import arimax, linreg
from .dates import iso_from_day, iso_week_label, month_label
from .errors import EmptySchedule, FaircastError, ScheduleOutOfRange
from .panel import PanelDataset, derive_incident

logger = logging.getLogger(__name__)

MODEL_LINREG = "linreg"
MODEL_ARIMAX = "arimax"


@dataclass(frozen=True)
class ForecastRecord:
    model: str
    unit: str
    origin: int
    horizon: int
    predicted: float
    actual: float

    @property
    def sort_key(self):
        return (self.model, self.unit, self.origin, self.horizon)


@dataclass(frozen=True)
class ErrorRecord:
    model: str
    unit: str
    origin: int
    horizon: int
    error_rate: float


@dataclass(frozen=True)
class MapeSeries:
    model: str
    unit: str
    horizon: int
    period_type: str  # "week" | "month"
    period: str       # "2020-W15" | "2020-04"
    mape: float       # percent
    n_obs: int
    n_skipped: int


@dataclass(frozen=True)
class ModelSpec:
    """Which model to run and with what configuration."""

    model: str = MODEL_LINREG
    horizons: tuple[int, ...] = (1, 7)
    target: str = "incident"  # or "cumulative"
    lag_spec: linreg.LagSpec = linreg.LagSpec()
    linreg_cfg: linreg.LinRegConfig = linreg.LinRegConfig()
    arimax_cfg: arimax.ArimaxConfig = arimax.ArimaxConfig()

    def __post_init__(self):
        if self.model not in (MODEL_LINREG, MODEL_ARIMAX):
            raise ValueError(f"unknown model {self.model!r}")
        if self.target not in ("incident", "cumulative"):
            raise ValueError(f"unknown target {self.target!r}")
        if not self.horizons or any(h < 1 for h in self.horizons):
            raise ValueError("horizons must be positive")


@dataclass
class RunReport:
    fits_attempted: int = 0
    fits_failed: int = 0
    records: int = 0
    failures: list[str] = field(default_factory=list)

    def merge(self, other: "RunReport") -> None:
        self.fits_attempted += other.fits_attempted
        self.fits_failed += other.fits_failed
        self.records += other.records
        self.failures.extend(other.failures)


def min_origin(panel: PanelDataset, spec: ModelSpec) -> int:
    """Earliest origin whose training window is fully computable."""
    if spec.model == MODEL_LINREG:
        cfg = spec.linreg_cfg
        return panel.start_day + cfg.window_days - 1 + spec.lag_spec.max_lag
    cfg = spec.arimax_cfg
    return panel.start_day + cfg.window_days - 1 + cfg.exog_lag_days


def max_origin(panel: PanelDataset, spec: ModelSpec) -> int:
    return panel.end_day - max(spec.horizons)


def default_schedule(panel: PanelDataset, spec: ModelSpec, stride: int = 1) -> range:
    lo, hi = min_origin(panel, spec), max_origin(panel, spec)
    if hi < lo:
        raise ScheduleOutOfRange(
            f"panel of {panel.n_days} days leaves no valid origin for {spec.model}"
        )
    return range(lo, hi + 1, stride)


def _actual(cum: np.ndarray, start_day: int, origin: int, h: int, target: str) -> float:
    i = origin - start_day
    if target == "incident":
        return float(cum[i + h] - cum[i])
    return float(cum[i + h])


def _run_unit_linreg(panel, unit, schedule, spec: ModelSpec):
    records: list[ForecastRecord] = []
    report = RunReport()
    cases = panel.cases[unit]
    cum = cases.cumulative
    for origin in schedule:
        report.fits_attempted += 1
        try:
            fit = linreg.fit_distributed_lag(panel, unit, origin, spec.lag_spec, spec.linreg_cfg)
            targets = linreg.forecast_targets(fit, panel, spec.horizons, spec.linreg_cfg)
        except FaircastError as exc:
            report.fits_failed += 1
            report.failures.append(f"{unit}@{iso_from_day(origin)}: {exc}")
            continue
        for h in spec.horizons:
            new_cases, cum_pred = targets[h]
            predicted = new_cases if spec.target == "incident" else cum_pred
            records.append(ForecastRecord(
                MODEL_LINREG, unit, origin, h, predicted,
                _actual(cum, cases.start_day, origin, h, spec.target),
            ))
    report.records = len(records)
    return records, report


def _run_unit_arimax(panel, unit, schedule, spec: ModelSpec):
    records: list[ForecastRecord] = []
    report = RunReport()
    cfg = spec.arimax_cfg
    cases = panel.cases[unit]
    mob = panel.mobility[unit]
    if mob.change is None:
        raise ValueError(f"unit {unit}: mobility not normalized")
    cum = cases.cumulative
    incident = derive_incident(cases)
    h_max = max(spec.horizons)
    w = cfg.window_days
    lag = cfg.exog_lag_days
    for origin in schedule:
        report.fits_attempted += 1
        i0 = origin - w + 1 - cases.start_day
        i1 = origin - cases.start_day + 1
        y_win = cum[i0:i1].astype(np.float64) if cfg.fit_cumulative else incident[i0:i1]
        j0 = origin - w + 1 - lag - mob.start_day
        x_win = mob.change[j0:j0 + w]
        x_fut = mob.change[j0 + w:j0 + w + h_max]
        try:
            fit = arimax.auto_fit(y_win, x_win, cfg)
            steps = arimax.forecast(fit, y_win, h_max, x_win, x_fut, lag)
        except FaircastError as exc:
            report.fits_failed += 1
            report.failures.append(f"{unit}@{iso_from_day(origin)}: {exc}")
            continue
        for h in spec.horizons:
            if cfg.fit_cumulative:
                cum_pred = float(steps[h - 1])
                predicted = cum_pred - float(cum[i1 - 1]) if spec.target == "incident" else cum_pred
            else:
                new_cases = float(steps[:h].sum())
                predicted = new_cases if spec.target == "incident" else float(cum[i1 - 1]) + new_cases
            records.append(ForecastRecord(
                MODEL_ARIMAX, unit, origin, h, predicted,
                _actual(cum, cases.start_day, origin, h, spec.target),
            ))
    report.records = len(records)
    return records, report


def run_backtest(
    panel: PanelDataset,
    spec: ModelSpec,
    schedule,
    workers: int = 1,
) -> tuple[list[ForecastRecord], RunReport]:
    """Fit and forecast every (unit, origin); returns sorted records.

    The schedule is a sequence of origin days. Every origin must leave room
    for the model's training window before it and for max(horizons) days of
    actuals after it, otherwise ScheduleOutOfRange is raised up front.
    """
    schedule = list(schedule)
    if not schedule:
        raise EmptySchedule("no origin dates in schedule")
    lo, hi = min_origin(panel, spec), max_origin(panel, spec)
    bad = [o for o in schedule if o < lo or o > hi]
    if bad:
        raise ScheduleOutOfRange(
            f"{len(bad)} origin(s) outside the valid range "
            f"[{iso_from_day(lo)}, {iso_from_day(hi)}], first {iso_from_day(bad[0])}"
        )

    run_unit = _run_unit_linreg if spec.model == MODEL_LINREG else _run_unit_arimax
    all_records: list[ForecastRecord] = []
    total = RunReport()
    if workers <= 1:
        results = [run_unit(panel, u, schedule, spec) for u in panel.units]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_unit, panel, u, schedule, spec) for u in panel.units]
            results = [f.result() for f in futures]
    for records, report in results:
        all_records.extend(records)
        total.merge(report)
    if total.fits_failed:
        logger.info("backtest %s: %d of %d fits failed", spec.model,
                    total.fits_failed, total.fits_attempted)
    all_records.sort(key=lambda r: r.sort_key)
    return all_records, total


# --- error metrics -----------------------------------------------------------

def error_rate(predicted: float, actual: float) -> float | None:
    """Absolute percentage deviation; None (skip) when the actual is zero."""
    if actual == 0:
        return None
    return abs(predicted - actual) / actual


def compute_error_records(
    forecasts: list[ForecastRecord],
) -> tuple[list[ErrorRecord], list[ForecastRecord]]:
    """Split forecasts into scored error records and skipped zero-actual ones."""
    errors: list[ErrorRecord] = []
    skipped: list[ForecastRecord] = []
    for f in forecasts:
        e = error_rate(f.predicted, f.actual)
        if e is None:
            skipped.append(f)
        else:
            errors.append(ErrorRecord(f.model, f.unit, f.origin, f.horizon, e))
    return errors, skipped


def _aggregate(
    errors, skipped, period_of, period_type, min_obs
) -> list[MapeSeries]:
    sums: dict[tuple, tuple[float, int]] = {}
    for e in errors:
        key = (e.model, e.unit, e.horizon, period_of(e.origin))
        s, n = sums.get(key, (0.0, 0))
        sums[key] = (s + e.error_rate, n + 1)
    skips: dict[tuple, int] = {}
    for f in skipped:
        key = (f.model, f.unit, f.horizon, period_of(f.origin))
        skips[key] = skips.get(key, 0) + 1
    out = []
    for key in sorted(sums):
        s, n = sums[key]
        if n < min_obs:
            continue
        model, unit, horizon, period = key
        out.append(MapeSeries(model, unit, horizon, period_type, period,
                              100.0 * s / n, n, skips.get(key, 0)))
    return out


def weekly_mape(
    errors: list[ErrorRecord],
    unit: str | None = None,
    horizon: int | None = None,
    model: str | None = None,
    skipped: list[ForecastRecord] = (),
    min_obs: int = 3,
) -> list[MapeSeries]:
    """Mean error rate (in percent) per ISO week keyed by origin date.

    Weeks with fewer than min_obs scored records are omitted. Optional
    unit/horizon/model arguments filter the input records first.
    """
    errors = [e for e in errors
              if (unit is None or e.unit == unit)
              and (horizon is None or e.horizon == horizon)
              and (model is None or e.model == model)]
    skipped = [f for f in skipped
               if (unit is None or f.unit == unit)
               and (horizon is None or f.horizon == horizon)
               and (model is None or f.model == model)]
    return _aggregate(errors, skipped, iso_week_label, "week", min_obs)


def monthly_mape(
    errors: list[ErrorRecord],
    unit: str | None = None,
    horizon: int | None = None,
    model: str | None = None,
    skipped: list[ForecastRecord] = (),
    min_obs: int = 3,
) -> list[MapeSeries]:
    """As weekly_mape, pooled over calendar months."""
    errors = [e for e in errors
              if (unit is None or e.unit == unit)
              and (horizon is None or e.horizon == horizon)
              and (model is None or e.model == model)]
    skipped = [f for f in skipped
               if (unit is None or f.unit == unit)
               and (horizon is None or f.horizon == horizon)
               and (model is None or f.model == model)]
    return _aggregate(errors, skipped, month_label, "month", min_obs)


# --- CSV output ---------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_forecasts_csv(path: str | Path, forecasts: list[ForecastRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "unit_id", "origin_date", "horizon", "predicted", "actual"])
        for f in sorted(forecasts, key=lambda r: r.sort_key):
            w.writerow([f.model, f.unit, iso_from_day(f.origin), f.horizon,
                        _fmt(f.predicted), _fmt(f.actual)])


def write_errors_csv(path: str | Path, errors: list[ErrorRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "unit_id", "origin_date", "horizon", "error_rate"])
        for e in sorted(errors, key=lambda r: (r.model, r.unit, r.origin, r.horizon)):
            w.writerow([e.model, e.unit, iso_from_day(e.origin), e.horizon, _fmt(e.error_rate)])


def write_mape_csv(path: str | Path, series: list[MapeSeries]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "unit_id", "horizon", "period_type", "period",
                    "mape", "n_obs", "n_skipped"])
        for m in sorted(series, key=lambda r: (r.model, r.unit, r.horizon,
                                               r.period_type, r.period)):
            w.writerow([m.model, m.unit, m.horizon, m.period_type, m.period,
                        _fmt(m.mape), m.n_obs, m.n_skipped])


def read_mape_csv(path: str | Path) -> list[MapeSeries]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out.append(MapeSeries(
                row["model"], row["unit_id"], int(row["horizon"]), row["period_type"],
                row["period"], float(row["mape"]), int(row["n_obs"]), int(row["n_skipped"]),
            ))
    return out
