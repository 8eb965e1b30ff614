"""Command-line pipeline: synth -> backtest -> audit, driven by one config file.

    faircast synth    --config run.ini        generate a synthetic dataset
    faircast backtest --config run.ini        fit, forecast, score
    faircast audit    --config run.ini        correlate errors with covariates

Summaries go to stdout, diagnostics to stderr. Exit codes: 0 success,
2 config error, 3 I/O error, 4 data validation error, 5 no successful fits.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, backtest, fairness, ingest, panel as panel_mod, synth
from .config import RunConfig, parse_config
from .errors import ConfigError, FaircastError
from .panel import COVARIATES

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_NO_FITS = 5

log = logging.getLogger("faircast")


def _load_config(args) -> RunConfig:
    cfg = parse_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
        if cfg.synth is not None:
            from dataclasses import replace
            cfg = replace(cfg, synth=replace(cfg.synth, seed=args.seed))
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.output_dir is not None:
        overrides["output_dir"] = Path(args.output_dir)
    if overrides:
        from dataclasses import replace
        cfg = replace(cfg, **overrides)
    return cfg


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    if cfg.synth is None:
        raise ConfigError("synth command needs a [synth] section")
    try:
        panel, _ = synth.gen_dataset(cfg.synth, cfg.output_dir)
    except OSError as exc:
        log.error("cannot write dataset: %s", exc)
        return EXIT_IO
    print(f"wrote {len(panel.units)} units x {panel.n_days} days to {cfg.output_dir} "
          "(cases.csv, mobility.csv, demographics.csv, truth.json)")
    return EXIT_OK


def _build_panel(cfg: RunConfig):
    paths = cfg.input_paths()
    for p in (paths.cases, paths.mobility, paths.demographics):
        if not Path(p).is_file():
            raise FaircastError(f"input file {p} is missing (run `faircast synth` first?)")
    cases, _ = ingest.parse_cases(paths.cases)
    mobility, _ = ingest.parse_mobility(paths.mobility, paths.mobility_schema)
    demographics, _ = ingest.parse_demographics(paths.demographics)
    lo, hi = cfg.baseline
    mobility = {u: panel_mod.normalize_mobility(s, lo, hi) for u, s in mobility.items()}
    return panel_mod.build_panel(cases, mobility, demographics)


def _model_specs(cfg: RunConfig) -> list[backtest.ModelSpec]:
    names = [cfg.selection] if cfg.selection != "both" else ["linreg", "arimax"]
    return [
        backtest.ModelSpec(
            model=name, horizons=cfg.horizons, target=cfg.target,
            lag_spec=cfg.lag_spec, linreg_cfg=cfg.linreg_cfg, arimax_cfg=cfg.arimax_cfg,
        )
        for name in names
    ]


def cmd_backtest(args) -> int:
    cfg = _load_config(args)
    panel = _build_panel(cfg)
    all_forecasts: list[backtest.ForecastRecord] = []
    totals = backtest.RunReport()
    for spec in _model_specs(cfg):
        if cfg.origin_start is None and cfg.origin_end is None:
            schedule = backtest.default_schedule(panel, spec, cfg.stride)
        else:
            lo = cfg.origin_start if cfg.origin_start is not None else backtest.min_origin(panel, spec)
            hi = cfg.origin_end if cfg.origin_end is not None else backtest.max_origin(panel, spec)
            schedule = range(lo, hi + 1, cfg.stride)
        records, report = backtest.run_backtest(panel, spec, schedule, cfg.workers)
        all_forecasts.extend(records)
        totals.merge(report)

    if not all_forecasts:
        log.error("no successful fits; nothing to write")
        return EXIT_NO_FITS

    errors, skipped = backtest.compute_error_records(all_forecasts)
    mape = backtest.weekly_mape(errors, skipped=skipped, min_obs=cfg.mape_min_obs) + \
        backtest.monthly_mape(errors, skipped=skipped, min_obs=cfg.mape_min_obs)

    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    backtest.write_forecasts_csv(out / "forecasts.csv", all_forecasts)
    backtest.write_errors_csv(out / "errors.csv", errors)
    backtest.write_mape_csv(out / "mape.csv", mape)
    print(f"forecast records: {len(all_forecasts)}  scored: {len(errors)}  "
          f"zero-actual skips: {len(skipped)}  failed fits: {totals.fits_failed} "
          f"of {totals.fits_attempted}")
    return EXIT_OK


def cmd_audit(args) -> int:
    cfg = _load_config(args)
    mape_path = cfg.output_dir / "mape.csv"
    if not mape_path.is_file():
        raise FaircastError(f"{mape_path} is missing; run `faircast backtest` first")
    demo_path = cfg.input_paths().demographics
    if not Path(demo_path).is_file():
        raise FaircastError(f"demographics file {demo_path} is missing")

    mape = backtest.read_mape_csv(mape_path)
    demographics, _ = ingest.parse_demographics(demo_path)
    models = sorted({m.model for m in mape})
    horizons = sorted({m.horizon for m in mape})

    covariates = list(COVARIATES)
    extra = None
    if cfg.placebo:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 999]))
        extra = {"placebo": {u: float(v) for u, v in
                             zip(sorted(demographics), rng.normal(size=len(demographics)))}}
        covariates.append("placebo")

    weekly: list[fairness.CorrelationResult] = []
    for model in models:
        for cov in covariates:
            for h in horizons:
                weekly.extend(fairness.weekly_correlation_series(
                    mape, demographics, cov, model, h,
                    min_n=cfg.audit_min_n, extra_covariates=extra,
                ))
    if not weekly:
        log.error("no week reached min_n=%d counties; audit is empty", cfg.audit_min_n)
        return EXIT_DATA

    tables = [
        fairness.monthly_table(weekly, mape, demographics, model,
                               covariates=tuple(covariates),
                               horizons=tuple(horizons),
                               min_n=cfg.audit_min_n, extra_covariates=extra)
        for model in models
    ]

    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    fairness.write_weekly_corr_csv(out / "weekly_corr.csv", weekly)
    fairness.write_monthly_table_csv(out / "monthly_table.csv", tables)

    report = {
        "config_sha256": hashlib.sha256(Path(cfg.config_path).read_bytes()).hexdigest(),
        "versions": {
            "faircast": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "models": models,
        "horizons": horizons,
        "covariates": covariates,
        "weekly_correlations": len(weekly),
        "months": sorted({month for t in tables for month in t.months}),
    }
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"weekly correlations: {len(weekly)}  models: {','.join(models)}  "
          f"months: {len(report['months'])}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="faircast",
        description="Mobility-driven case forecasting with a fairness audit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("synth", cmd_synth), ("backtest", cmd_backtest), ("audit", cmd_audit)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the INI run config")
        p.add_argument("--seed", type=int, default=None, help="override the run seed")
        p.add_argument("--workers", type=int, default=None, help="override worker count")
        p.add_argument("--output-dir", default=None, help="override the output directory")
        p.set_defaults(fn=fn)

    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        log.error("config: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("i/o: %s", exc)
        return EXIT_IO
    except FaircastError as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
