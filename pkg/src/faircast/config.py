"""Run configuration: a flat INI file with one section per concern.

Exactly one of [synth] (generate data) or [input] (ingest existing CSVs)
must be present. All other sections are optional and fall back to the
documented defaults. Example:

    [synth]
    seed = 42
    n_units = 200
    n_days = 300

    [model]
    selection = both

    [run]
    output_dir = out
    workers = 4

Dates are ISO-8601; lists are comma-separated. See README for every key.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .arimax import ArimaxConfig
from .dates import day_from_iso, month_range
from .errors import ConfigError
from .linreg import LagSpec, LinRegConfig
from .synth import SynthConfig

VALID_MODELS = ("linreg", "arimax", "both")


@dataclass(frozen=True)
class InputPaths:
    cases: Path
    mobility: Path
    demographics: Path
    mobility_schema: str = "aggregated"


@dataclass(frozen=True)
class RunConfig:
    config_path: Path
    output_dir: Path
    synth: SynthConfig | None
    inputs: InputPaths | None
    baseline: tuple[int, int]            # inclusive day window
    selection: str                       # linreg | arimax | both
    horizons: tuple[int, ...]
    target: str
    lag_spec: LagSpec
    linreg_cfg: LinRegConfig
    arimax_cfg: ArimaxConfig
    origin_start: int | None
    origin_end: int | None
    stride: int
    seed: int
    workers: int
    audit_min_n: int
    mape_min_obs: int
    placebo: bool
    p_method: str                        # t | permutation

    def input_paths(self) -> InputPaths:
        """Concrete input files: explicit [input] or the synth output files."""
        if self.inputs is not None:
            return self.inputs
        return InputPaths(
            cases=self.output_dir / "cases.csv",
            mobility=self.output_dir / "mobility.csv",
            demographics=self.output_dir / "demographics.csv",
        )


def _get(section, key, conv, default):
    if key not in section:
        return default
    raw = section[key]
    try:
        return conv(raw)
    except (ValueError, ArithmeticError) as exc:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r} ({exc})") from None


def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _int_tuple(raw: str) -> tuple[int, ...]:
    return tuple(int(p.strip()) for p in raw.split(",") if p.strip())


def _float_tuple(raw: str) -> tuple[float, ...]:
    return tuple(float(p.strip()) for p in raw.split(",") if p.strip())


def parse_config(path: str | Path) -> RunConfig:
    """Parse and validate a run configuration file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    has_synth = parser.has_section("synth")
    has_input = parser.has_section("input")
    if has_synth == has_input:
        raise ConfigError("config must contain exactly one of [synth] or [input]")

    run = parser["run"] if parser.has_section("run") else {}
    output_dir = Path(_get(run, "output_dir", str, "out"))
    seed = _get(run, "seed", int, 0)
    workers = _get(run, "workers", int, 1)
    horizons = _get(run, "horizons", _int_tuple, (1, 7))
    if not set(horizons) <= {1, 7} or not horizons:
        raise ConfigError(f"horizons must be a non-empty subset of {{1, 7}}, got {horizons}")
    target = _get(run, "target", str, "incident")
    if target not in ("incident", "cumulative"):
        raise ConfigError(f"target must be incident or cumulative, got {target!r}")

    synth_cfg = None
    inputs = None
    if has_synth:
        s = parser["synth"]
        if "seed" not in s:
            raise ConfigError("[synth] section is missing the required key 'seed'")
        try:
            synth_cfg = SynthConfig(
                n_units=_get(s, "n_units", int, SynthConfig.n_units),
                n_days=_get(s, "n_days", int, SynthConfig.n_days),
                baseline_days=_get(s, "baseline_days", int, SynthConfig.baseline_days),
                seed=_get(s, "seed", int, None),
                true_betas=_get(s, "true_betas", _float_tuple, SynthConfig.true_betas),
                growth_noise_sd=_get(s, "growth_noise_sd", float, SynthConfig.growth_noise_sd),
                bias_strength=_get(s, "bias_strength", float, SynthConfig.bias_strength),
                sigma_max=_get(s, "sigma_max", float, SynthConfig.sigma_max),
                noise_persistence=_get(s, "noise_persistence", float,
                                       SynthConfig.noise_persistence),
                init_rate=_get(s, "init_rate", float, SynthConfig.init_rate),
                start_day=_get(s, "start_date", day_from_iso, SynthConfig.start_day),
            )
        except ValueError as exc:
            raise ConfigError(f"[synth]: {exc}") from None
    else:
        s = parser["input"]
        for key in ("cases", "mobility", "demographics"):
            if key not in s:
                raise ConfigError(f"[input] section is missing the required key {key!r}")
        schema = _get(s, "mobility_schema", str, "aggregated")
        if schema not in ("od", "aggregated"):
            raise ConfigError(f"mobility_schema must be od or aggregated, got {schema!r}")
        inputs = InputPaths(Path(s["cases"]), Path(s["mobility"]),
                            Path(s["demographics"]), schema)

    if parser.has_section("baseline"):
        b = parser["baseline"]
        if "month" in b:
            try:
                year, month = (int(p) for p in b["month"].split("-"))
                baseline = month_range(year, month)
            except ValueError:
                raise ConfigError(f"[baseline] month {b['month']!r} is not YYYY-MM") from None
        elif "start" in b and "end" in b:
            baseline = (_get(b, "start", day_from_iso, None), _get(b, "end", day_from_iso, None))
        else:
            raise ConfigError("[baseline] needs either month or start and end")
    elif synth_cfg is not None:
        baseline = synth_cfg.baseline_window
    else:
        raise ConfigError("[baseline] section is required when ingesting files")
    if baseline[1] < baseline[0]:
        raise ConfigError("baseline window is empty")

    m = parser["model"] if parser.has_section("model") else {}
    selection = _get(m, "selection", str, "linreg")
    if selection not in VALID_MODELS:
        raise ConfigError(f"selection must be one of {VALID_MODELS}, got {selection!r}")
    try:
        lag_spec = LagSpec()
        linreg_cfg = LinRegConfig(
            window_days=_get(m, "window_days", int, LinRegConfig.window_days),
            include_intercept=_get(m, "include_intercept", _bool, LinRegConfig.include_intercept),
            min_cumulative=_get(m, "min_cumulative", int, LinRegConfig.min_cumulative),
            freeze_mobility=_get(m, "freeze_mobility", _bool, LinRegConfig.freeze_mobility),
        )
        arimax_cfg = ArimaxConfig(
            window_days=_get(m, "arimax_window_days", int, ArimaxConfig.window_days),
            exog_lag_days=_get(m, "exog_lag_days", int, ArimaxConfig.exog_lag_days),
            p_max=_get(m, "p_max", int, ArimaxConfig.p_max),
            d_max=_get(m, "d_max", int, ArimaxConfig.d_max),
            q_max=_get(m, "q_max", int, ArimaxConfig.q_max),
            tol=_get(m, "tol", float, ArimaxConfig.tol),
            max_iter=_get(m, "max_iter", int, ArimaxConfig.max_iter),
            fit_cumulative=_get(m, "fit_cumulative", _bool, ArimaxConfig.fit_cumulative),
        )
    except ValueError as exc:
        raise ConfigError(f"[model]: {exc}") from None

    sched = parser["schedule"] if parser.has_section("schedule") else {}
    origin_start = _get(sched, "origin_start", day_from_iso, None)
    origin_end = _get(sched, "origin_end", day_from_iso, None)
    stride = _get(sched, "stride", int, 1)
    if stride < 1:
        raise ConfigError("stride must be >= 1")

    a = parser["audit"] if parser.has_section("audit") else {}
    p_method = _get(a, "p_method", str, "t")
    if p_method not in ("t", "permutation"):
        raise ConfigError(f"p_method must be t or permutation, got {p_method!r}")

    return RunConfig(
        config_path=path,
        output_dir=output_dir,
        synth=synth_cfg,
        inputs=inputs,
        baseline=baseline,
        selection=selection,
        horizons=horizons,
        target=target,
        lag_spec=lag_spec,
        linreg_cfg=linreg_cfg,
        arimax_cfg=arimax_cfg,
        origin_start=origin_start,
        origin_end=origin_end,
        stride=stride,
        seed=seed,
        workers=workers,
        audit_min_n=_get(a, "min_n", int, 10),
        mape_min_obs=_get(a, "min_obs", int, 3),
        placebo=_get(a, "placebo", _bool, False),
        p_method=p_method,
    )
