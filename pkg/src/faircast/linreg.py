"""Model 1: per-unit distributed-lag regression of log case growth on mobility.

For one unit and one origin date, the daily log growth of cumulative cases,
log I_t - log I_{t-1}, is regressed on the mean mobility change over a set
of lag bands (defaults: days 1-7, 8-14 and 15-21 back). Fits use a rolling
training window ending at the origin; forecasts compound the predicted
growth rates forward from the origin's case count.

Days where log growth is undefined (cumulative below the threshold on the
day or the day before) are masked out of the window, not zero-filled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InsufficientData, InsufficientHistory, SingularDesign
from .panel import MobilitySeries, PanelDataset

DEFAULT_BANDS = ((1, 7), (8, 14), (15, 21))

#: Designs whose condition estimate exceeds this are rejected as singular.
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class LagSpec:
    """Ordered, non-overlapping lag bands (inclusive day offsets back from t)."""

    bands: tuple[tuple[int, int], ...] = DEFAULT_BANDS

    def __post_init__(self):
        prev_to = 0
        for lag_from, lag_to in self.bands:
            if lag_from < 1 or lag_to < lag_from:
                raise ValueError(f"bad lag band ({lag_from}, {lag_to})")
            if lag_from <= prev_to:
                raise ValueError("lag bands must be ascending and non-overlapping")
            prev_to = lag_to
        if not self.bands:
            raise ValueError("at least one lag band required")

    @property
    def max_lag(self) -> int:
        return self.bands[-1][1]


@dataclass(frozen=True)
class LinRegConfig:
    window_days: int = 21       # training window length, 1-day shift between origins
    shift_days: int = 1
    include_intercept: bool = False
    min_cumulative: int = 1     # growth undefined until cumulative reaches this
    freeze_mobility: bool = False  # forecast with last week's mean instead of observed

    def __post_init__(self):
        if self.min_cumulative < 1:
            raise ValueError("min_cumulative must be >= 1 (log undefined at 0)")
        if self.shift_days < 1:
            raise ValueError("shift_days must be >= 1")


@dataclass(frozen=True)
class FittedLinReg:
    unit: str
    origin: int
    bands: tuple[tuple[int, int], ...]
    betas: np.ndarray           # one coefficient per band
    intercept: float | None
    residual_sd: float
    n_obs: int


def _band_means(
    change: np.ndarray, start_day: int, ts: np.ndarray, bands
) -> np.ndarray:
    """Per-band mean change for each day in ts; shape (len(ts), len(bands))."""
    n = change.size
    ts = np.asarray(ts, dtype=np.int64)
    out = np.empty((ts.size, len(bands)))
    for j, (lag_from, lag_to) in enumerate(bands):
        width = lag_to - lag_from + 1
        lo = ts - lag_to - start_day
        if lo.size and (lo.min() < 0 or lo.max() + width > n):
            raise InsufficientHistory(
                f"lags {lag_from}-{lag_to} reach outside the mobility series"
            )
        out[:, j] = sliding_window_view(change, width)[lo].mean(axis=1)
    return out


def _design_condition(x: np.ndarray) -> float:
    s = np.linalg.svd(x, compute_uv=False)
    if s[-1] == 0.0:
        return np.inf
    return float(s[0] / s[-1])


def fit_distributed_lag(
    panel: PanelDataset,
    unit: str,
    origin: int,
    spec: LagSpec = LagSpec(),
    cfg: LinRegConfig = LinRegConfig(),
) -> FittedLinReg:
    """Least-squares fit of log growth on band-averaged mobility change.

    The training window is the cfg.window_days days ending at the origin.
    A day enters the fit only if cumulative cases reach cfg.min_cumulative on
    it and the day before, and every band average is computable. Solved via
    QR-based least squares; raises SingularDesign when the design condition
    estimate exceeds CONDITION_LIMIT, InsufficientData when fewer than
    (regressors + 2) days survive masking.
    """
    cases = panel.cases[unit]
    mob = panel.mobility[unit]
    if mob.change is None:
        raise ValueError(f"unit {unit}: mobility not normalized")

    window = np.arange(origin - cfg.window_days + 1, origin + 1)
    cum = cases.cumulative
    idx = window - cases.start_day
    usable = (idx >= 1) & (idx < cum.size)
    # growth defined only where this and the prior day clear the threshold
    valid = usable.copy()
    valid[usable] &= (cum[idx[usable]] >= cfg.min_cumulative) & (
        cum[idx[usable] - 1] >= cfg.min_cumulative
    )
    # every band average must be computable
    earliest = mob.start_day + spec.max_lag
    valid &= window >= earliest

    ts = window[valid]
    k = len(spec.bands) + int(cfg.include_intercept)
    if ts.size < k + 2:
        raise InsufficientData(
            f"unit {unit}, origin {origin}: {ts.size} valid days, need {k + 2}"
        )

    i = ts - cases.start_day
    y = np.log(cum[i].astype(np.float64)) - np.log(cum[i - 1].astype(np.float64))
    x = _band_means(mob.change, mob.start_day, ts, spec.bands)
    if cfg.include_intercept:
        x = np.column_stack([x, np.ones(ts.size)])

    if _design_condition(x) > CONDITION_LIMIT:
        raise SingularDesign(
            f"unit {unit}, origin {origin}: design condition exceeds {CONDITION_LIMIT:g}"
        )

    coef, _, _, _ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ coef
    dof = ts.size - k
    residual_sd = float(np.sqrt(resid @ resid / dof)) if dof > 0 else 0.0

    n_bands = len(spec.bands)
    return FittedLinReg(
        unit=unit,
        origin=origin,
        bands=spec.bands,
        betas=coef[:n_bands].copy(),
        intercept=float(coef[n_bands]) if cfg.include_intercept else None,
        residual_sd=residual_sd,
        n_obs=int(ts.size),
    )


def _change_for_prediction(
    mob: MobilitySeries, origin: int, horizon: int, max_lag: int, freeze: bool
) -> tuple[np.ndarray, int]:
    """Change series used when predicting past the origin.

    With freeze on, days after the origin take the mean change of the last
    observed week; otherwise recorded values are used (mobility is exogenous
    and available in hindsight during a backtest).
    """
    change = mob.change
    assert change is not None
    if not freeze:
        return change, mob.start_day
    upto = origin - mob.start_day + 1
    if upto < 7 or upto > change.size:
        raise InsufficientHistory(
            f"unit {mob.unit}: need a full week through the origin to freeze mobility"
        )
    frozen = change[upto - 7:upto].mean()
    return np.concatenate([change[:upto], np.full(horizon, frozen)]), mob.start_day


def predict_growth_path(
    fit: FittedLinReg,
    panel: PanelDataset,
    horizon: int,
    cfg: LinRegConfig = LinRegConfig(),
) -> np.ndarray:
    """Predicted log growth for days origin+1 .. origin+horizon."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    mob = panel.mobility[fit.unit]
    change, start_day = _change_for_prediction(
        mob, fit.origin, horizon, fit.bands[-1][1], cfg.freeze_mobility
    )
    ts = np.arange(fit.origin + 1, fit.origin + horizon + 1)
    x = _band_means(change, start_day, ts, fit.bands)
    y_hat = x @ fit.betas
    if fit.intercept is not None:
        y_hat = y_hat + fit.intercept
    return y_hat


def forecast_targets(
    fit: FittedLinReg,
    panel: PanelDataset,
    horizons: tuple[int, ...] = (1, 7),
    cfg: LinRegConfig = LinRegConfig(),
) -> dict[int, tuple[float, float]]:
    """Per-horizon (predicted new cases since origin, predicted cumulative).

    Cumulative at origin+h is the origin count compounded by the predicted
    growth path; new cases are the difference from the origin count.
    """
    cases = panel.cases[fit.unit]
    i_origin = int(cases.cumulative[fit.origin - cases.start_day])
    if i_origin <= 0:
        raise InsufficientData(f"unit {fit.unit}: no cases at origin {fit.origin}")
    h_max = max(horizons)
    growth = predict_growth_path(fit, panel, h_max, cfg)
    cum_pred = i_origin * np.exp(np.cumsum(growth))
    return {h: (float(cum_pred[h - 1] - i_origin), float(cum_pred[h - 1])) for h in horizons}
