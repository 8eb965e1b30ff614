import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faircast.errors import (
    DecreasingCumulative,
    EmptyPanel,
    InsufficientHistory,
    WindowOutOfRange,
    ZeroBaseline,
)
from faircast.panel import (
    CaseSeries,
    MobilitySeries,
    build_panel,
    derive_incident,
    lag_window_average,
    normalize_mobility,
)

from conftest import make_demo, make_unit


def test_derive_incident_basic():
    cases = CaseSeries("a", 0, np.array([0, 0, 3, 5]))
    inc = derive_incident(cases)
    assert np.isnan(inc[0])
    assert inc[1:].tolist() == [0, 3, 2]


def test_derive_incident_constant():
    inc = derive_incident(CaseSeries("a", 0, np.array([7, 7, 7])))
    assert np.isnan(inc[0]) and inc[1:].tolist() == [0, 0]


def test_decreasing_cumulative_rejected():
    with pytest.raises(DecreasingCumulative) as exc:
        CaseSeries("a", 10, np.array([5, 4]))
    assert exc.value.unit == "a" and exc.value.day == 11


def test_normalize_direct_ratio():
    trips = np.full(20, 100.0)
    trips[15] = 80.0
    s = MobilitySeries("a", 0, trips)
    out = normalize_mobility(s, 0, 9)
    assert out.change[15] == pytest.approx(0.8)
    assert out.change[0] == pytest.approx(1.0)


def test_normalize_identity():
    s = MobilitySeries("a", 0, np.full(15, 42.0))
    assert np.allclose(normalize_mobility(s, 0, 6).change, 1.0)


def test_normalize_zero_baseline():
    trips = np.zeros(10)
    trips[5:] = 3.0
    with pytest.raises(ZeroBaseline):
        normalize_mobility(MobilitySeries("a", 0, trips), 0, 4)


def test_normalize_window_out_of_range():
    s = MobilitySeries("a", 5, np.ones(10))
    with pytest.raises(WindowOutOfRange):
        normalize_mobility(s, 0, 4)


def test_lag_window_average_constant():
    s = MobilitySeries("a", 1, np.ones(30), np.ones(30))
    assert lag_window_average(s, 30, 1, 7) == pytest.approx(1.0)


def test_lag_window_average_sequence():
    vals = np.arange(1.0, 31.0)  # value = day number for days 1..30
    s = MobilitySeries("a", 1, vals, vals)
    assert lag_window_average(s, 30, 1, 7) == pytest.approx(26.0)


def test_lag_window_average_boundary():
    s = MobilitySeries("a", 0, np.ones(30), np.ones(30))
    with pytest.raises(InsufficientHistory):
        lag_window_average(s, 10, 15, 21)


def _three_unit_inputs():
    cases, mobility, demo = {}, {}, {}
    for unit in ("a", "b", "c"):
        c, m = make_unit(unit, 0, np.arange(10, dtype=np.int64), np.ones(10))
        cases[unit], mobility[unit], demo[unit] = c, m, make_demo(unit)
    return cases, mobility, demo


def test_build_panel_full_intersection():
    cases, mobility, demo = _three_unit_inputs()
    panel = build_panel(cases, mobility, demo)
    assert panel.units == ("a", "b", "c")
    assert panel.n_days == 10


def test_build_panel_drops_partial_units(caplog):
    cases, mobility, demo = _three_unit_inputs()
    extra, _ = make_unit("d", 0, np.arange(10, dtype=np.int64), np.ones(10))
    cases["d"] = extra
    with caplog.at_level("WARNING"):
        panel = build_panel(cases, mobility, demo)
    assert "d" not in panel.units
    assert any("dropped 1" in r.message for r in caplog.records)


def test_build_panel_clips_to_common_span():
    cases, mobility, demo = _three_unit_inputs()
    c, m = make_unit("a", 2, np.arange(5, dtype=np.int64), np.ones(5))
    cases["a"], mobility["a"] = c, m
    panel = build_panel(cases, mobility, demo)
    assert panel.start_day == 2 and panel.end_day == 6
    assert len(panel.cases["b"]) == 5


def test_build_panel_empty_intersection():
    cases, _, _ = _three_unit_inputs()
    _, mobility, demo = _three_unit_inputs()
    mobility = {"z": mobility["a"].clipped(0, 9)}
    demo = {"z": make_demo("z")}
    with pytest.raises(EmptyPanel):
        build_panel(cases, {"z": MobilitySeries("z", 0, np.ones(10))}, demo)


@given(st.lists(st.integers(min_value=0, max_value=50), min_size=2, max_size=40),
       st.integers(min_value=0, max_value=1000))
def test_incident_roundtrip(increments, first):
    cumulative = first + np.cumsum([0] + increments)
    cases = CaseSeries("a", 0, cumulative.astype(np.int64))
    inc = derive_incident(cases)
    rebuilt = cases.cumulative[0] + np.nancumsum(inc)
    assert np.all(rebuilt[1:] == cases.cumulative[1:])


@settings(max_examples=50)
@given(st.floats(min_value=1e-6, max_value=1e6, allow_nan=False))
def test_normalize_scale_invariant(c):
    rng = np.random.default_rng(3)
    trips = rng.uniform(10, 200, size=40)
    base = normalize_mobility(MobilitySeries("a", 0, trips), 0, 9).change
    scaled = normalize_mobility(MobilitySeries("a", 0, trips * c), 0, 9).change
    assert np.allclose(base, scaled, rtol=1e-12, atol=0)


def test_lag_window_shift_identity():
    rng = np.random.default_rng(5)
    vals = rng.uniform(0.1, 2.0, size=60)
    s = MobilitySeries("a", 0, vals, vals)
    for t in range(25, 50):
        assert lag_window_average(s, t, 1, 7) == lag_window_average(s, t + 1, 2, 8)
