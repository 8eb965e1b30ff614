import numpy as np
import pytest

from faircast.panel import CaseSeries, DemographicRecord, MobilitySeries, PanelDataset
from faircast.synth import SynthConfig, gen_panel


@pytest.fixture(scope="session")
def small_panel():
    """30-unit noiseless-ish synthetic panel shared across suites."""
    cfg = SynthConfig(n_units=30, n_days=120, seed=7)
    panel, truth = gen_panel(cfg)
    return cfg, panel, truth


def make_unit(unit, start_day, cumulative, trips, change=None):
    cases = CaseSeries(unit, start_day, np.asarray(cumulative, dtype=np.int64))
    mob = MobilitySeries(unit, start_day, np.asarray(trips, dtype=float),
                         None if change is None else np.asarray(change, dtype=float))
    return cases, mob


def make_demo(unit, **kw):
    defaults = dict(income=50_000.0, smartphone_pct=0.8, population=10_000.0,
                    education_pct=0.3, nchs=3, median_age=38.0)
    defaults.update(kw)
    return DemographicRecord(unit=unit, **defaults)


def exact_growth_panel(betas=(0.3, 0.2, 0.1), n_days=90, seed=11, scale=10**12):
    """Panel whose log growth equals the band model exactly (to ~1e-12).

    Case counts are huge integers so that rounding is negligible relative to
    the growth rates; mobility change varies enough for a well-conditioned
    design.
    """
    rng = np.random.default_rng(seed)
    start = 18_000
    unit = "X001"
    level = 0.5 + 0.3 * np.sin(np.arange(n_days) / 9.0) + 0.1 * rng.normal(size=n_days)
    change = np.maximum(0.05, level)
    growth = np.zeros(n_days)
    from numpy.lib.stride_tricks import sliding_window_view
    bands = ((1, 7), (8, 14), (15, 21))
    for (a, b), beta in zip(bands, betas):
        w = b - a + 1
        means = sliding_window_view(change, w).mean(axis=1)
        growth[21:] += beta * means[21 - b: n_days - b]
    log_cum = np.log(scale) + np.concatenate([np.zeros(21), np.cumsum(growth[21:])])
    cumulative = np.round(np.exp(log_cum)).astype(np.int64)
    cases = CaseSeries(unit, start, cumulative)
    mob = MobilitySeries(unit, start, change * 1000.0, change)
    demo = make_demo(unit)
    panel = PanelDataset((unit,), {unit: cases}, {unit: mob}, {unit: demo},
                         start, start + n_days - 1)
    return panel, np.asarray(betas, dtype=float), growth
