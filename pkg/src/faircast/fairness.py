"""Rank-correlation audit of forecast errors against county covariates.

For every week, the per-county MAPE of a model/horizon is correlated
(Spearman) with each sociodemographic covariate across counties; a negative
coefficient means the model is more accurate where the covariate is high.
Weekly coefficients are then averaged per calendar month into a table whose
cells carry significance stars computed from a pooled correlation of the
county-level monthly MAPE (the significance of an averaged coefficient has
no standard definition, so stars come from the pooled coefficient).

Spearman rho is the Pearson correlation of average ranks (ties get the mean
of their positional ranks). Two-sided p-values use the t approximation with
n - 2 degrees of freedom, evaluated through the regularized incomplete beta
function; a seeded permutation alternative is provided for small n.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import betainc

from .backtest import MapeSeries
from .dates import month_label
from .errors import DegenerateVariable, NonFiniteValue
from .panel import COVARIATES, DemographicRecord

logger = logging.getLogger(__name__)

STAR_LEVELS = ((0.001, "***"), (0.01, "**"), (0.05, "*"))


@dataclass(frozen=True)
class CorrelationResult:
    covariate: str
    model: str
    horizon: int
    period: str      # week or month label
    rho: float
    p_value: float
    n: int


@dataclass(frozen=True)
class FairnessCell:
    mean_rho: float   # mean of the month's weekly coefficients
    p_value: float    # from the pooled monthly correlation (nan when unavailable)
    stars: str
    n_weeks: int
    n_units: int


@dataclass(frozen=True)
class FairnessTable:
    model: str
    months: tuple[str, ...]
    covariates: tuple[str, ...]
    horizons: tuple[int, ...]
    cells: dict[tuple[str, str, int], FairnessCell]  # (month, covariate, horizon)


def average_ranks(values) -> np.ndarray:
    """Ranks starting at 1 for the smallest value; ties share the mean rank."""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise NonFiniteValue("cannot rank an empty list")
    if not np.all(np.isfinite(x)):
        raise NonFiniteValue("cannot rank non-finite values")
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=np.float64)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Rank correlation: Pearson correlation of the average ranks."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d and equally long")
    if x.size < 3:
        raise ValueError(f"need at least 3 observations, got {x.size}")
    rx = average_ranks(x)
    ry = average_ranks(y)
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateVariable("constant input; rank correlation undefined")
    rxc = rx - rx.mean()
    ryc = ry - ry.mean()
    rho = float((rxc @ ryc) / math.sqrt((rxc @ rxc) * (ryc @ ryc)))
    return max(-1.0, min(1.0, rho))


def spearman_pvalue(rho: float, n: int) -> float:
    """Two-sided p for the null of no association, t approximation, n-2 df."""
    if n < 4:
        raise ValueError(f"need n >= 4 for the t approximation, got {n}")
    if abs(rho) >= 1.0:
        return 0.0
    df = n - 2
    t_sq = rho * rho * df / (1.0 - rho * rho)
    return float(betainc(0.5 * df, 0.5, df / (df + t_sq)))


def spearman_pvalue_permutation(x, y, n_perm: int = 999, seed: int = 0) -> float:
    """Seeded two-sided permutation p-value for small samples."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    observed = abs(spearman(x, y))
    rng = np.random.default_rng(np.random.SeedSequence([seed, x.size]))
    hits = 0
    for _ in range(n_perm):
        perm = rng.permutation(y)
        try:
            if abs(spearman(x, perm)) >= observed - 1e-12:
                hits += 1
        except DegenerateVariable:  # pragma: no cover - x/y already checked
            continue
    return (hits + 1) / (n_perm + 1)


def stars_for(p: float) -> str:
    if not math.isfinite(p):
        return ""
    for level, mark in STAR_LEVELS:
        if p < level:
            return mark
    return ""


def _covariate_values(
    demographics: dict[str, DemographicRecord],
    covariate: str,
    extra: dict[str, dict[str, float]] | None,
) -> dict[str, float]:
    if extra and covariate in extra:
        return extra[covariate]
    return {u: rec.covariate(covariate) for u, rec in demographics.items()}


def weekly_correlation_series(
    mape: list[MapeSeries],
    demographics: dict[str, DemographicRecord],
    covariate: str,
    model: str,
    horizon: int,
    min_n: int = 10,
    extra_covariates: dict[str, dict[str, float]] | None = None,
) -> list[CorrelationResult]:
    """One Spearman coefficient per week across counties.

    Counties lacking either a weekly MAPE or the covariate are dropped
    pairwise. Weeks with fewer than min_n counties, or with a constant
    variable, are omitted (logged), never imputed.
    """
    values = _covariate_values(demographics, covariate, extra_covariates)
    weeks: dict[str, list[tuple[float, float]]] = {}
    for m in mape:
        if m.model != model or m.horizon != horizon or m.period_type != "week":
            continue
        v = values.get(m.unit)
        if v is None:
            continue
        weeks.setdefault(m.period, []).append((m.mape, v))
    out = []
    for week in sorted(weeks):
        pairs = weeks[week]
        if len(pairs) < min_n:
            logger.info("week %s: only %d counties, below min_n=%d; omitted",
                        week, len(pairs), min_n)
            continue
        mape_v = [p[0] for p in pairs]
        cov_v = [p[1] for p in pairs]
        try:
            rho = spearman(mape_v, cov_v)
        except DegenerateVariable as exc:
            logger.info("week %s, covariate %s: %s; omitted", week, covariate, exc)
            continue
        out.append(CorrelationResult(
            covariate, model, horizon, week, rho,
            spearman_pvalue(rho, len(pairs)), len(pairs),
        ))
    return out


def _week_month(week_label: str) -> str:
    """Calendar month containing the ISO week's Thursday (its defining day)."""
    import datetime as dt

    year, wk = week_label.split("-W")
    thursday = dt.date.fromisocalendar(int(year), int(wk), 4)
    return f"{thursday.year}-{thursday.month:02d}"


def monthly_table(
    weekly: list[CorrelationResult],
    mape: list[MapeSeries],
    demographics: dict[str, DemographicRecord],
    model: str,
    covariates: tuple[str, ...] = COVARIATES,
    horizons: tuple[int, ...] = (1, 7),
    min_n: int = 10,
    extra_covariates: dict[str, dict[str, float]] | None = None,
) -> FairnessTable:
    """Monthly averages of the weekly coefficients, with pooled-p stars.

    The cell value is the plain mean of that month's weekly rho values; its
    stars come from a single correlation of county-level monthly MAPE with
    the covariate.
    """
    monthly_by_cov: dict[tuple[str, int, str], list[float]] = {}
    for r in weekly:
        if r.model != model:
            continue
        monthly_by_cov.setdefault((r.covariate, r.horizon, _week_month(r.period)), []).append(r.rho)

    pooled: dict[tuple[int, str], dict[str, float]] = {}
    for m in mape:
        if m.model == model and m.period_type == "month":
            pooled.setdefault((m.horizon, m.period), {})[m.unit] = m.mape

    months = sorted({month for (_, _, month) in monthly_by_cov})
    cells: dict[tuple[str, str, int], FairnessCell] = {}
    for month in months:
        for cov in covariates:
            values = _covariate_values(demographics, cov, extra_covariates)
            for h in horizons:
                rhos = monthly_by_cov.get((cov, h, month))
                if not rhos:
                    continue
                month_mape = pooled.get((h, month), {})
                units = sorted(u for u in month_mape if u in values)
                p = math.nan
                if len(units) >= min_n:
                    try:
                        pooled_rho = spearman([month_mape[u] for u in units],
                                              [values[u] for u in units])
                        p = spearman_pvalue(pooled_rho, len(units))
                    except DegenerateVariable:
                        pass
                cells[(month, cov, h)] = FairnessCell(
                    mean_rho=float(np.mean(rhos)),
                    p_value=p,
                    stars=stars_for(p),
                    n_weeks=len(rhos),
                    n_units=len(units),
                )
    return FairnessTable(model, tuple(months), tuple(covariates), tuple(horizons), cells)


# --- CSV output ---------------------------------------------------------------

def write_weekly_corr_csv(path: str | Path, results: list[CorrelationResult]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "horizon", "covariate", "week", "rho", "p_value", "n"])
        key = lambda r: (r.model, r.horizon, r.covariate, r.period)
        for r in sorted(results, key=key):
            w.writerow([r.model, r.horizon, r.covariate, r.period,
                        repr(r.rho), repr(r.p_value), r.n])


def write_monthly_table_csv(path: str | Path, tables: list[FairnessTable]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "month", "covariate", "horizon",
                    "mean_rho", "pooled_p", "stars", "n_weeks", "n_units"])
        for table in tables:
            for month in table.months:
                for cov in table.covariates:
                    for h in table.horizons:
                        cell = table.cells.get((month, cov, h))
                        if cell is None:
                            continue
                        w.writerow([table.model, month, cov, h, repr(cell.mean_rho),
                                    repr(cell.p_value), cell.stars,
                                    cell.n_weeks, cell.n_units])
