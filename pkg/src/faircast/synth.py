"""Seeded synthetic panel with a planted, covariate-dependent mobility bias.

The generator reuses the distributed-lag growth equation generatively: true
log case growth is the band-averaged true mobility change times the known
coefficients, plus autocorrelated noise. What the models get to see is a
corrupted mobility series: each unit's observed change is the true change
times a multiplicative noise whose standard deviation falls with smartphone
ownership and population. Low-ownership, small, rural units therefore carry
noisier mobility, which is exactly the sampling-bias story the audit is
supposed to detect, and here the per-unit noise scale is known ground truth.

Randomness is split per (unit, purpose) from the master seed, so adding
units leaves every existing unit's series unchanged. Covariate levels are
driven by one latent urban-affluence factor (standardized log population),
giving the configured sign structure: ownership rises with income and
education, falls with the rural code and median age.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dates import day_from_iso
from .errors import FaircastError
from .ingest import write_cases_csv, write_demographics_csv, write_mobility_csv
from .linreg import DEFAULT_BANDS
from .panel import (
    CaseSeries,
    DemographicRecord,
    MobilitySeries,
    PanelDataset,
    build_panel,
    normalize_mobility,
)

# stream purposes (kept stable; reordering would change every dataset);
# _P_NATIONAL is keyed with unit index 0 and shared by all units
_P_COV, _P_MOB, _P_EPI, _P_OBS, _P_NATIONAL = 1, 2, 3, 4, 5

# covariate recipe around the latent urban-affluence factor
_POP_LOG_MEAN, _POP_LOG_SD = 10.4, 1.1
_OWN_BASE, _OWN_LOAD, _OWN_NOISE = 0.55, 0.09, 0.02
_INC_BASE, _INC_LOAD, _INC_NOISE = 28_000.0, 0.35, 0.18
_AGE_BASE, _AGE_LOAD, _AGE_NOISE = 38.0, -3.2, 2.2
_EDU_BASE, _EDU_LOAD, _EDU_NOISE = -0.8, 0.55, 0.25

# mobility template: pre-epidemic baseline near 1, fast dip, partial recovery.
# Dip depth, recovery level and the slow meander are national (shared by all
# units); units differ in weekly phase, wiggle amplitude, a small local
# meander and daily jitter. Keeping the level national bounds cross-county
# variation in true growth, so relative forecast errors are not dominated by
# which county happened to drift to a low-growth regime.
_DIP_RANGE = (0.10, 0.14)
_RECOVER_RANGE = (0.13, 0.17)
_WIGGLE_RANGE = (0.02, 0.05)
_TEMPLATE_JITTER_SD = 0.01
# slow multiplicative level meander: the exploitable mobility signal that
# sampling noise corrupts (without it the exogenous series is nearly constant
# within a training window and carries no forecasting value)
_MEANDER_SD = 0.1
_MEANDER_RHO = 0.97
_MEANDER_CLIP = 0.20
_UNIT_MEANDER_SD = 0.05
_UNIT_MEANDER_RHO = 0.9

_TRIPS_PER_CAPITA = 0.35
_SIGMA_REF_PERCENTILE = 5.0  # population percentile defining the sigma reference

# int64-safe ceiling for generated cumulative case counts
_MAX_LOG_CASES = 43.0


@dataclass(frozen=True)
class SynthConfig:
    n_units: int = 50
    n_days: int = 160
    baseline_days: int = 28
    seed: int = 20200214
    true_betas: tuple[float, float, float] = (0.3, 0.2, 0.1)
    growth_noise_sd: float = 0.02
    bias_strength: float = 0.5     # kappa in the sampling-noise formula
    sigma_max: float = 0.5
    noise_persistence: float = 0.9  # AR(1) day-to-day correlation of both noises
    init_rate: float = 5e-6       # initial cases per capita
    start_day: int = day_from_iso("2020-01-06")

    def __post_init__(self):
        if self.n_units < 30:
            raise ValueError("n_units must be >= 30")
        if self.n_days <= self.baseline_days + 28:
            raise ValueError("n_days must exceed baseline_days + 28")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if len(self.true_betas) != len(DEFAULT_BANDS):
            raise ValueError(f"need {len(DEFAULT_BANDS)} betas, one per lag band")
        if not 0.0 <= self.noise_persistence < 1.0:
            raise ValueError("noise_persistence must be in [0, 1)")

    @property
    def baseline_window(self) -> tuple[int, int]:
        return self.start_day, self.start_day + self.baseline_days - 1

    def unit_ids(self) -> list[str]:
        return [f"C{i:04d}" for i in range(self.n_units)]


@dataclass(frozen=True)
class SynthTruth:
    """Ground truth the audit is later asked to rediscover."""

    seed: int
    true_betas: tuple[float, float, float]
    sigma: dict[str, float]              # per-unit sampling-noise sd
    true_change: dict[str, np.ndarray]   # uncorrupted mobility change
    true_cumulative: dict[str, np.ndarray]  # pre-rounding cumulative cases


def _rng(cfg: SynthConfig, unit_index: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, unit_index, purpose]))


def _ar1(rng: np.random.Generator, n: int, sd: float, rho: float) -> np.ndarray:
    """Gaussian AR(1) with marginal standard deviation sd."""
    if sd == 0.0:
        return np.zeros(n)
    z = rng.normal(0.0, 1.0, n)
    e = np.empty(n)
    e[0] = sd * z[0]
    c = math.sqrt(1.0 - rho * rho) * sd
    for t in range(1, n):
        e[t] = rho * e[t - 1] + c * z[t]
    return e


def gen_covariates(cfg: SynthConfig) -> tuple[dict[str, DemographicRecord], dict[str, float]]:
    """Demographic records plus the per-unit sampling-noise sd they imply.

    sigma_i = min(sigma_max, kappa / sqrt(ownership_i * population_i / ref)),
    with ref the 5th-percentile population, so the noise scale is strictly
    decreasing in ownership at fixed population and is rarely capped.
    """
    units = cfg.unit_ids()
    z = np.empty(cfg.n_units)
    noise = np.empty((cfg.n_units, 4))
    for i in range(cfg.n_units):
        rng = _rng(cfg, i, _P_COV)
        z[i] = rng.normal()
        noise[i] = rng.normal(size=4)

    population = np.exp(_POP_LOG_MEAN + _POP_LOG_SD * z)
    ownership = np.clip(_OWN_BASE + _OWN_LOAD * z + _OWN_NOISE * noise[:, 0], 0.05, 0.99)
    income = _INC_BASE * np.exp(_INC_LOAD * z + _INC_NOISE * noise[:, 1])
    age = np.clip(_AGE_BASE + _AGE_LOAD * z + _AGE_NOISE * noise[:, 2], 21.0, 65.0)
    education = 1.0 / (1.0 + np.exp(-(_EDU_BASE + _EDU_LOAD * z + _EDU_NOISE * noise[:, 3])))

    # rural code from population rank: most populous unit gets 1
    desc = np.argsort(-population, kind="stable")
    nchs = np.empty(cfg.n_units, dtype=np.int64)
    nchs[desc] = 1 + (6 * np.arange(cfg.n_units)) // cfg.n_units

    ref = float(np.percentile(population, _SIGMA_REF_PERCENTILE))
    sigma = np.minimum(
        cfg.sigma_max,
        cfg.bias_strength / np.sqrt(ownership * population / ref),
    )

    demographics = {}
    sigmas = {}
    for i, unit in enumerate(units):
        demographics[unit] = DemographicRecord(
            unit=unit,
            income=float(income[i]),
            smartphone_pct=float(ownership[i]),
            population=float(round(population[i])),
            education_pct=float(education[i]),
            nchs=int(nchs[i]),
            median_age=float(age[i]),
        )
        sigmas[unit] = float(sigma[i])
    return demographics, sigmas


def _national_level(cfg: SynthConfig) -> np.ndarray:
    """Shared mobility level path: baseline, dip, recovery, slow meander."""
    rng = _rng(cfg, 0, _P_NATIONAL)
    dip = rng.uniform(*_DIP_RANGE)
    recover = rng.uniform(*_RECOVER_RANGE)
    level = np.ones(cfg.n_days)
    s = np.arange(cfg.n_days - cfg.baseline_days, dtype=np.float64)
    level[cfg.baseline_days:] = (
        dip + (1.0 - dip) * np.exp(-s / 7.0) + (recover - dip) * (1.0 - np.exp(-s / 40.0))
    )
    meander = np.exp(np.clip(_ar1(rng, cfg.n_days, _MEANDER_SD, _MEANDER_RHO),
                             -_MEANDER_CLIP, _MEANDER_CLIP))
    return level * meander


def gen_true_mobility(cfg: SynthConfig, unit_index: int) -> np.ndarray:
    """True mobility change: the national path with unit-specific texture.

    Units differ by weekly-seasonality phase and amplitude, a small local
    meander and daily jitter. The series is normalized so its
    baseline-window mean is exactly 1.
    """
    rng = _rng(cfg, unit_index, _P_MOB)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    wiggle = rng.uniform(*_WIGGLE_RANGE)

    t = np.arange(cfg.n_days, dtype=np.float64)
    local = np.exp(_ar1(rng, cfg.n_days, _UNIT_MEANDER_SD, _UNIT_MEANDER_RHO))
    series = (
        _national_level(cfg)
        * local
        * (1.0 + wiggle * np.sin(2.0 * math.pi * t / 7.0 + phase))
        * np.exp(rng.normal(0.0, _TEMPLATE_JITTER_SD, cfg.n_days))
    )
    return series / series[: cfg.baseline_days].mean()


def gen_epidemic(
    cfg: SynthConfig, true_change: np.ndarray, unit_index: int, population: float
) -> tuple[CaseSeries, np.ndarray]:
    """Cases driven by the true mobility bands through the known coefficients.

    Returns the integer CaseSeries (rounded, monotonicity enforced) and the
    pre-rounding cumulative series used by exact-recovery oracles. Growth
    starts once all lag bands are available; before that the count sits at
    its population-proportional initial value.
    """
    n = cfg.n_days
    max_lag = DEFAULT_BANDS[-1][1]
    eta = _ar1(_rng(cfg, unit_index, _P_EPI), n, cfg.growth_noise_sd, cfg.noise_persistence)

    growth = np.zeros(n)
    for (lag_from, lag_to), beta in zip(DEFAULT_BANDS, cfg.true_betas):
        width = lag_to - lag_from + 1
        means = sliding_window_view(true_change, width).mean(axis=1)
        # band mean at day t is the window starting at t - lag_to
        growth[max_lag:] += beta * means[max_lag - lag_to : n - lag_to]
    growth[max_lag:] += eta[max_lag:]

    init = max(1.0, float(np.round(population * cfg.init_rate)))
    log_cum = math.log(init) + np.concatenate([np.zeros(max_lag), np.cumsum(growth[max_lag:])])
    if log_cum.max() > _MAX_LOG_CASES:
        raise FaircastError(
            "generated epidemic overflows integer case counts; "
            "lower true_betas, init_rate or n_days"
        )
    true_cumulative = np.exp(log_cum)
    rounded = np.maximum.accumulate(np.round(true_cumulative)).astype(np.int64)
    return CaseSeries(cfg.unit_ids()[unit_index], cfg.start_day, rounded), true_cumulative


def observe_mobility(
    cfg: SynthConfig, true_change: np.ndarray, unit_index: int, sigma: float
) -> np.ndarray:
    """True change times multiplicative sampling noise of marginal sd sigma.

    Noise is day-to-day autocorrelated (cfg.noise_persistence) and floored so
    the observed series stays positive.
    """
    e = _ar1(_rng(cfg, unit_index, _P_OBS), cfg.n_days, sigma, cfg.noise_persistence)
    return true_change * np.maximum(0.05, 1.0 + e)


def gen_panel(cfg: SynthConfig) -> tuple[PanelDataset, SynthTruth]:
    """Build the full synthetic panel in memory."""
    demographics, sigmas = gen_covariates(cfg)
    units = cfg.unit_ids()
    b_start, b_end = cfg.baseline_window

    cases: dict[str, CaseSeries] = {}
    mobility: dict[str, MobilitySeries] = {}
    true_change: dict[str, np.ndarray] = {}
    true_cumulative: dict[str, np.ndarray] = {}
    for i, unit in enumerate(units):
        tc = gen_true_mobility(cfg, i)
        cases[unit], true_cumulative[unit] = gen_epidemic(
            cfg, tc, i, demographics[unit].population
        )
        observed = observe_mobility(cfg, tc, i, sigmas[unit])
        trips = observed * demographics[unit].population * _TRIPS_PER_CAPITA
        mobility[unit] = normalize_mobility(
            MobilitySeries(unit, cfg.start_day, trips), b_start, b_end
        )
        true_change[unit] = tc

    panel = build_panel(cases, mobility, demographics)
    truth = SynthTruth(cfg.seed, cfg.true_betas, sigmas, true_change, true_cumulative)
    return panel, truth


def write_truth_json(path: str | Path, cfg: SynthConfig, truth: SynthTruth,
                     demographics: dict[str, DemographicRecord]) -> None:
    payload = {
        "seed": truth.seed,
        "true_betas": list(truth.true_betas),
        "units": [
            {
                "unit_id": unit,
                "sigma": truth.sigma[unit],
                "ownership": demographics[unit].smartphone_pct,
                "population": demographics[unit].population,
            }
            for unit in sorted(truth.sigma)
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def gen_dataset(cfg: SynthConfig, out_dir: str | Path) -> tuple[PanelDataset, SynthTruth]:
    """Generate the panel and write cases/mobility/demographics CSVs + truth.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    panel, truth = gen_panel(cfg)
    write_cases_csv(out / "cases.csv", panel.cases)
    # raw trips, not the normalized change: ingest re-derives the change
    write_mobility_csv(out / "mobility.csv", panel.mobility)
    write_demographics_csv(out / "demographics.csv", panel.demographics)
    write_truth_json(out / "truth.json", cfg, truth, panel.demographics)
    return panel, truth
