"""Command line interface.

Subcommands cover the stage-wise workflow (synth, train, validate,
arch-search, generate, evaluate, backtest, stability) plus ``run`` for
the whole pipeline from one JSON configuration. Exit codes: 0 ok,
1 config error, 2 data error, 3 training divergence, 4 valuation error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .data import (
    compute_rolling_returns,
    fill_gaps,
    load_factor_schema,
    load_time_series,
    normalize,
)
from .errors import EsganError
from .gan.config import GanConfig
from .gan.model import generate_scenarios, load_model, save_model
from .gan.train import train_gan
from .pipeline import (
    build_risk_payload,
    config_hash,
    load_market_value_series,
    load_run_config,
    prepare_data,
    run_pipeline,
    scenarios_to_csv,
    validate_paths,
    validation_payload,
    write_csv,
    write_error_report,
    write_json,
)
from .portfolio import load_portfolios, stability_study, worst_case_backtest
from .synthetic import SyntheticSpec, default_factors, make_synthetic_dataset
from .validation import (
    architecture_search,
    evaluate_checkpoint,
    make_checkpoint_evaluator,
    novelty_distances,
)
from .valuation import load_migration_matrix, load_universe
from .curve import load_curve_spec

ENV_OUT_DIR = "ESGAN_OUT_DIR"


def _prepare_returns(data_csv, factors, window):
    ts = fill_gaps(load_time_series(data_csv, factors))
    return normalize(compute_rolling_returns(ts, window))


def _cmd_synth(args) -> int:
    factors = default_factors(args.n_relative, args.n_absolute)
    spec = SyntheticSpec(
        factors=factors,
        days=args.days,
        correlation=args.correlation,
        start_date=args.start_date,
    )
    meta = make_synthetic_dataset(args.out, spec, seed=args.seed)
    schema_path = args.schema_out or str(Path(args.out).with_suffix(".schema.json"))
    write_json(Path(schema_path), {"factors": [f.to_dict() for f in factors]})
    write_json(Path(str(args.out) + ".meta.json"), meta)
    print(f"wrote {args.out} ({args.days} days x {len(factors)} factors), schema {schema_path}")
    return 0


def _cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    if args.data:
        cfg = replace(cfg, data_csv=args.data)
    validate_paths(replace(cfg, stages={**cfg.stages, "evaluate": False}))
    data = prepare_data(cfg)
    hook = make_checkpoint_evaluator(data, n_samples=cfg.eval_samples, seed=cfg.gan.seed)
    model = train_gan(cfg.gan, data, checkpoint_hook=hook)
    out = args.out or str(Path(cfg.out_dir) / "model.npz")
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    print(f"trained {cfg.gan.iterations} iterations, model saved to {out}")
    return 0


def _cmd_validate(args) -> int:
    model = load_model(args.model)
    stamp = f"model:{Path(args.model).name}"
    payload = validation_payload(model, stamp)
    if args.data:
        if args.schema:
            factors = load_factor_schema(args.schema)
        elif model.scaling is not None:
            factors = list(model.scaling.factors)
        else:
            raise EsganError("model carries no factor schema; pass --schema")
        data = _prepare_returns(args.data, factors, args.window)
        report = evaluate_checkpoint(model, data)
        payload["final_model"] = {
            "per_factor_wasserstein": report.per_factor_wasserstein.tolist(),
            "max_wasserstein": report.tf_value,
        }
        if args.novelty:
            # nearest-neighbor distances in normalized space flag memorized rows
            scenarios = generate_scenarios(model, args.novelty)
            normalized = (scenarios.values - data.scaling.means) / data.scaling.stds
            distances = novelty_distances(normalized, data.returns)
            payload["novelty"] = {
                "count": int(distances.size),
                "min": float(distances.min()),
                "mean": float(distances.mean()),
                "max": float(distances.max()),
                "exact_copies": int(np.count_nonzero(distances == 0.0)),
            }
    write_json(Path(args.out), payload)
    if args.plot_data:
        if model.scaling is not None:
            factor_ids = [f.factor_id for f in model.scaling.factors]
        else:
            factor_ids = [str(j) for j in range(model.data_dim)]
        rows = (
            (c["iteration"], fid, repr(float(v)))
            for c in payload["checkpoints"]
            if c["per_factor_wasserstein"] is not None
            for fid, v in zip(factor_ids, c["per_factor_wasserstein"])
        )
        write_csv(Path(args.plot_data), ["iteration", "factor", "wasserstein"], rows, stamp)
    print(f"validation report written to {args.out}")
    return 0


def _cmd_arch_search(args) -> int:
    with open(args.grid, "r", encoding="utf-8") as fh:
        grid_spec = json.load(fh)
    base = GanConfig.from_dict(grid_spec.get("base", {}))
    grid = [replace(base, **member) for member in grid_spec["grid"]]
    factors = load_factor_schema(args.schema)
    data = _prepare_returns(args.data, factors, args.window)
    results = architecture_search(
        grid, data, base_seed=grid_spec.get("base_seed", 0), eval_samples=args.eval_samples
    )
    write_csv(
        Path(args.out),
        ["rank", "grid_index", "tf", "n_parameters", "failed", "config"],
        (
            (
                rank,
                r.grid_index,
                repr(r.tf_value),
                r.n_parameters,
                int(r.failed),
                json.dumps(r.config.to_dict(), sort_keys=True),
            )
            for rank, r in enumerate(results)
        ),
        f"grid:{Path(args.grid).name}",
    )
    best = results[0]
    print(f"best: grid index {best.grid_index}, tf={best.tf_value:.6g}, table in {args.out}")
    return 0


def _cmd_generate(args) -> int:
    model = load_model(args.model)
    scenarios = generate_scenarios(model, args.count, seed=args.seed)
    scenarios_to_csv(Path(args.out), scenarios, f"model:{Path(args.model).name}")
    print(f"wrote {scenarios.n_scenarios} x {scenarios.n_factors} scenarios to {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    model = load_model(args.model)
    scenarios = generate_scenarios(model, args.scenarios, seed=args.seed)
    instruments = load_universe(args.universe)
    portfolios = load_portfolios(args.portfolios)
    mm = (
        load_migration_matrix(args.migration, recovery_rate=args.recovery_rate)
        if args.migration
        else None
    )
    curve_spec = load_curve_spec(args.curve) if args.curve else None
    backtest_series = load_market_value_series(args.series) if args.series else None
    payload = build_risk_payload(
        scenarios,
        instruments,
        portfolios,
        mm,
        curve_spec,
        min_scenarios=args.min_scenarios,
        backtest_series=backtest_series,
    )
    payload["config"] = f"model:{Path(args.model).name}"
    payload["seed"] = model.config.seed if args.seed is None else args.seed
    write_json(Path(args.out), payload)
    print(f"risk report for {len(portfolios)} portfolios written to {args.out}")
    return 0


def _cmd_backtest(args) -> int:
    series = load_market_value_series(args.series)
    payload = {"window": args.window, "portfolios": {}}
    for pid, (dates, values) in series.items():
        bt = worst_case_backtest(dates, values, window=args.window)
        payload["portfolios"][pid] = {"worst_case": bt.worst_case, "date": bt.date}
    write_json(Path(args.out), payload)
    print(f"backtest for {len(series)} series written to {args.out}")
    return 0


def _cmd_stability(args) -> int:
    cfg = load_run_config(args.config)
    validate_paths(replace(cfg, stages={**cfg.stages, "evaluate": False}))
    data = prepare_data(cfg)
    n_scenarios = args.scenarios or cfg.scenario_count
    try:
        result = stability_study(
            cfg.gan,
            data,
            n_trainings=args.trainings,
            n_generations_each=args.generations,
            n_scenarios=n_scenarios,
            base_seed=cfg.seed,
        )
    except EsganError as exc:
        partial = getattr(exc, "partial_shocks", None)
        if partial is not None and partial[0].size:
            np.savez(Path(args.out).with_suffix(".partial.npz"),
                     shocks_down=partial[0], shocks_up=partial[1])
        raise
    write_csv(
        Path(args.out),
        ["factor", "cqv_down", "cqv_up"],
        (
            (fid, repr(float(result.cqv_down[j])), repr(float(result.cqv_up[j])))
            for j, fid in enumerate(result.factor_ids)
        ),
        config_hash(cfg),
    )
    n_sets = result.shocks_down.shape[0]
    print(f"stability table over {n_sets} scenario sets written to {args.out}")
    return 0


def _cmd_run(args) -> int:
    cfg = load_run_config(args.config)
    if args.out_dir:
        cfg = replace(cfg, out_dir=args.out_dir)
    try:
        summary = run_pipeline(cfg, threads=args.threads)
    except EsganError as exc:
        write_error_report(cfg.out_dir, exc)
        raise
    print(f"pipeline complete, report in {Path(cfg.out_dir) / 'report.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="esgan",
        description="GAN-based economic scenario generator and market-risk engine",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="pin the BLAS thread-pool size (recorded in run metadata; results "
        "are reproducible per fixed thread count)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic level CSV and schema")
    p.add_argument("--out", required=True)
    p.add_argument("--schema-out", default=None)
    p.add_argument("--n-relative", type=int, default=2)
    p.add_argument("--n-absolute", type=int, default=2)
    p.add_argument("--days", type=int, default=1200)
    p.add_argument("--correlation", type=float, default=0.5)
    p.add_argument("--start-date", default="2002-03-28")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train the GAN from a run config")
    p.add_argument("--config", required=True)
    p.add_argument("--data", default=None, help="override the config data CSV")
    p.add_argument("--out", default=None, help="model output path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("validate", help="report training-quality metrics for a model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", default=None, help="level CSV for a fresh final evaluation")
    p.add_argument("--schema", default=None)
    p.add_argument("--window", type=int, default=258)
    p.add_argument("--out", required=True)
    p.add_argument("--plot-data", default=None, help="CSV of (iteration, factor, distance)")
    p.add_argument("--novelty", type=int, default=None, metavar="N",
                   help="also report nearest-neighbor distances of N generated rows")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("arch-search", help="grid search over network shapes")
    p.add_argument("--grid", required=True, help="JSON with base config and grid overrides")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--window", type=int, default=258)
    p.add_argument("--eval-samples", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_arch_search)

    p = sub.add_parser("generate", help="draw scenarios from a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--count", type=int, default=50_000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("evaluate", help="portfolio risk charges from a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--universe", required=True)
    p.add_argument("--portfolios", required=True)
    p.add_argument("--migration", default=None)
    p.add_argument("--curve", default=None)
    p.add_argument("--series", default=None, help="market-value CSV for backtest block")
    p.add_argument("--scenarios", type=int, default=50_000)
    p.add_argument("--min-scenarios", type=int, default=200)
    p.add_argument("--recovery-rate", type=float, default=0.45)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("backtest", help="worst rolling one-year return per series")
    p.add_argument("--series", required=True)
    p.add_argument("--window", type=int, default=258)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_backtest)

    p = sub.add_parser("stability", help="CQV of shocks over repeated runs")
    p.add_argument("--config", required=True)
    p.add_argument("--trainings", type=int, default=4)
    p.add_argument("--generations", type=int, default=5)
    p.add_argument("--scenarios", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_stability)

    p = sub.add_parser("run", help="full pipeline from one run config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "out_dir", None) is None and args.command == "run":
        if os.environ.get(ENV_OUT_DIR):
            args.out_dir = os.environ[ENV_OUT_DIR]
    if args.threads is not None:
        import threadpoolctl

        threadpoolctl.threadpool_limits(args.threads)
    try:
        return args.func(args)
    except EsganError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
