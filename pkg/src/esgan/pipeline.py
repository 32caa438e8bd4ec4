"""End-to-end run orchestration.

One JSON run configuration drives the whole chain
data -> train -> validate -> generate -> evaluate -> report. Every
artifact written carries the sha256 hash of the canonical configuration,
the seed and a format version; nothing numeric depends on wall-clock
time, so re-running an identical configuration reproduces the reports
byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .curve import load_curve_spec
from .data import (
    ScenarioSet,
    compute_rolling_returns,
    fill_gaps,
    load_factor_schema,
    load_time_series,
    normalize,
)
from .errors import ConfigError
from .gan.config import GanConfig
from .gan.model import GanModel, generate_scenarios, save_model
from .gan.train import train_gan
from .portfolio import (
    TWO_SIDED,
    factor_shock,
    implied_percentile,
    instrument_value_matrix,
    joint_quantile_exceedance,
    load_portfolios,
    portfolio_scenario_values,
    risk_charge,
    worst_case_backtest,
)
from .validation import make_checkpoint_evaluator, target_function
from .valuation import load_migration_matrix, load_universe

REPORT_FORMAT_VERSION = 1


@dataclass
class RunConfig:
    """Paths, GAN hyperparameters and pipeline toggles for one run."""

    data_csv: str
    schema: str
    out_dir: str
    universe: str | None = None
    portfolios: str | None = None
    migration: str | None = None
    curve: str | None = None
    backtest_series: str | None = None
    gan: GanConfig = GanConfig()
    seed: int = 0
    window: int = 258
    scenario_count: int = 50_000
    recovery_rate: float = 0.45
    eval_samples: int | None = None
    shift_floors: dict[str, tuple[float | None, float | None]] = field(default_factory=dict)
    stages: dict[str, bool] = field(default_factory=dict)
    min_scenarios: int = 200

    STAGE_DEFAULTS = {
        "train": True,
        "validate": True,
        "generate": True,
        "evaluate": True,
        "backtest": False,
    }

    def stage_enabled(self, name: str) -> bool:
        return self.stages.get(name, self.STAGE_DEFAULTS[name])

    def to_dict(self) -> dict[str, Any]:
        return {
            "data_csv": self.data_csv,
            "schema": self.schema,
            "out_dir": self.out_dir,
            "universe": self.universe,
            "portfolios": self.portfolios,
            "migration": self.migration,
            "curve": self.curve,
            "backtest_series": self.backtest_series,
            "gan": self.gan.to_dict(),
            "seed": self.seed,
            "window": self.window,
            "scenario_count": self.scenario_count,
            "recovery_rate": self.recovery_rate,
            "eval_samples": self.eval_samples,
            "shift_floors": {k: list(v) for k, v in self.shift_floors.items()},
            "stages": dict(self.stages),
            "min_scenarios": self.min_scenarios,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any], base_dir: Path | None = None) -> "RunConfig":
        d = dict(d)
        paths = d.pop("paths", {})
        merged = {**paths, **d}
        gan_dict = merged.pop("gan", {})
        seed = int(merged.get("seed", 0))
        gan_dict.setdefault("seed", seed)
        floors = {
            k: (v[0], v[1]) for k, v in (merged.pop("shift_floors", {}) or {}).items()
        }

        def resolve(p):
            if p is None:
                return None
            p = Path(p)
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            return str(p)

        try:
            return cls(
                data_csv=resolve(merged["data_csv"]),
                schema=resolve(merged["schema"]),
                out_dir=resolve(merged.get("out_dir", "out")),
                universe=resolve(merged.get("universe")),
                portfolios=resolve(merged.get("portfolios")),
                migration=resolve(merged.get("migration")),
                curve=resolve(merged.get("curve")),
                backtest_series=resolve(merged.get("backtest_series")),
                gan=GanConfig.from_dict(gan_dict),
                seed=seed,
                window=int(merged.get("window", 258)),
                scenario_count=int(merged.get("scenario_count", 50_000)),
                recovery_rate=float(merged.get("recovery_rate", 0.45)),
                eval_samples=merged.get("eval_samples"),
                shift_floors=floors,
                stages=dict(merged.get("stages", {})),
                min_scenarios=int(merged.get("min_scenarios", 200)),
            )
        except KeyError as exc:
            raise ConfigError(f"run config missing key {exc}") from exc


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return RunConfig.from_dict(raw, base_dir=path.parent)


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(cfg.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def validate_paths(cfg: RunConfig) -> None:
    """Fail fast on missing inputs before any compute."""
    required = {"data_csv": cfg.data_csv, "schema": cfg.schema}
    if cfg.stage_enabled("evaluate"):
        required.update(universe=cfg.universe, portfolios=cfg.portfolios)
    for name, p in required.items():
        if p is None:
            raise ConfigError(f"run config needs a {name} path")
        if not Path(p).exists():
            raise ConfigError(f"{name} path does not exist: {p}")
    for name, p in (
        ("migration", cfg.migration),
        ("curve", cfg.curve),
        ("backtest_series", cfg.backtest_series),
    ):
        if p is not None and not Path(p).exists():
            raise ConfigError(f"{name} path does not exist: {p}")


def write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_csv(path: Path, header: list[str], rows, stamp: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config={stamp}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def scenarios_to_csv(path: Path, scenarios: ScenarioSet, stamp: str) -> None:
    write_csv(
        path,
        scenarios.factor_ids(),
        ([repr(float(x)) for x in row] for row in scenarios.values),
        stamp,
    )


# --------------------------------------------------------------------------
# stages
# --------------------------------------------------------------------------


def prepare_data(cfg: RunConfig):
    factors = load_factor_schema(cfg.schema)
    ts = fill_gaps(load_time_series(cfg.data_csv, factors))
    return normalize(compute_rolling_returns(ts, cfg.window))


def validation_payload(model: GanModel, stamp: str) -> dict:
    history = [
        {
            "iteration": c.iteration,
            "per_factor_wasserstein": None if c.metrics is None else c.metrics.tolist(),
            "max_wasserstein": None if c.metrics is None else float(np.max(c.metrics)),
        }
        for c in model.history
    ]
    payload = {
        "config": stamp,
        "format_version": REPORT_FORMAT_VERSION,
        "seed": model.config.seed,
        "checkpoints": history,
    }
    try:
        payload["target_function"] = target_function(model.history)
    except ValueError:
        payload["target_function"] = None
    return payload


def build_risk_payload(
    scenarios: ScenarioSet,
    instruments,
    portfolios,
    mm=None,
    curve_spec=None,
    min_scenarios: int = 200,
    backtest_series: dict[str, tuple[list[str], list[float]]] | None = None,
) -> dict:
    """Risk charges, factor shocks, JQE matrix and optional backtest block."""
    value_matrix = instrument_value_matrix(instruments, scenarios, mm, curve_spec)

    shocks = {}
    for j, factor in enumerate(scenarios.factors):
        column = scenarios.values[:, j]
        down, up = factor_shock(column, TWO_SIDED)
        shocks[factor.factor_id] = {"down": down, "up": up}

    jqe_matrix = [
        [
            joint_quantile_exceedance(scenarios.values[:, a], scenarios.values[:, b])
            for b in range(scenarios.n_factors)
        ]
        for a in range(scenarios.n_factors)
    ]

    results = []
    returns_by_portfolio: dict[str, np.ndarray] = {}
    for pf in portfolios:
        res = risk_charge(
            pf,
            scenarios,
            instruments,
            mm,
            curve_spec,
            min_scenarios=min_scenarios,
            value_matrix=value_matrix,
        )
        net, base, asset_base = portfolio_scenario_values(pf, instruments, value_matrix)
        returns_by_portfolio[pf.id] = (net - base) / abs(base)
        results.append(
            {
                "portfolio": res.portfolio_id,
                "risk_charge": res.risk_charge,
                "var_absolute": res.var_absolute,
                "base_value": res.base_value,
                "asset_base_value": res.asset_base_value,
                "risk_charge_asset_base": res.risk_charge_asset_base,
                "pnl_quantiles": res.pnl_quantiles,
            }
        )

    payload = {
        "portfolios": results,
        "factor_shocks": shocks,
        "jqe": {
            "quantile": 0.8,
            "factor_ids": scenarios.factor_ids(),
            "matrix": jqe_matrix,
        },
    }

    if backtest_series:
        backtests = {}
        for pid, (dates, values) in backtest_series.items():
            bt = worst_case_backtest(dates, values)
            entry = {"worst_case": bt.worst_case, "date": bt.date}
            if pid in returns_by_portfolio:
                entry["implied_percentile"] = implied_percentile(
                    bt.worst_case, returns_by_portfolio[pid]
                )
            backtests[pid] = entry
        payload["backtest"] = backtests
    return payload


def load_market_value_series(path: str | Path) -> dict[str, tuple[list[str], list[float]]]:
    """CSV ``date,<portfolio id columns...>`` -> per-column (dates, values)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header = rows[0]
    if header[0] != "date":
        raise ConfigError(f"{path}: first column must be 'date'")
    dates = [r[0] for r in rows[1:]]
    out = {}
    for j, pid in enumerate(header[1:], start=1):
        out[pid] = (dates, [float(r[j]) for r in rows[1:]])
    return out


def run_pipeline(cfg: RunConfig, threads: int | None = None) -> dict:
    """Execute the enabled stages in order; returns the summary report.

    ``threads`` is purely informational here (the CLI applies the actual
    thread-pool limit); it is stamped into the report so a run's numeric
    environment can be reproduced.
    """
    validate_paths(cfg)
    stamp = config_hash(cfg)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    summary: dict[str, Any] = {
        "config": stamp,
        "format_version": REPORT_FORMAT_VERSION,
        "seed": cfg.seed,
        "threads": threads,
        "stages": {},
    }

    data = prepare_data(cfg)
    summary["stages"]["data"] = {
        "observations": data.n_obs,
        "factors": data.n_factors,
        "window": data.window,
    }

    model = None
    if cfg.stage_enabled("train"):
        hook = (
            make_checkpoint_evaluator(data, n_samples=cfg.eval_samples, seed=cfg.gan.seed)
            if cfg.stage_enabled("validate")
            else None
        )
        model = train_gan(cfg.gan, data, checkpoint_hook=hook)
        save_model(model, out_dir / "model.npz")
        summary["stages"]["train"] = {
            "iterations": cfg.gan.iterations,
            "model": "model.npz",
        }

    if model is not None and cfg.stage_enabled("validate"):
        payload = validation_payload(model, stamp)
        write_json(out_dir / "validation.json", payload)
        write_csv(
            out_dir / "validation_curves.csv",
            ["iteration", "factor", "wasserstein"],
            (
                (c.iteration, fid, repr(float(c.metrics[j])))
                for c in model.history
                if c.metrics is not None
                for j, fid in enumerate(data.factor_ids())
            ),
            stamp,
        )
        summary["stages"]["validate"] = {
            "target_function": payload["target_function"],
            "report": "validation.json",
        }

    scenarios = None
    if model is not None and cfg.stage_enabled("generate"):
        scenarios = generate_scenarios(model, cfg.scenario_count)
        if cfg.shift_floors:
            scenarios = scenarios.clamped(cfg.shift_floors)
        scenarios_to_csv(out_dir / "scenarios.csv", scenarios, stamp)
        summary["stages"]["generate"] = {
            "count": scenarios.n_scenarios,
            "file": "scenarios.csv",
        }

    if scenarios is not None and cfg.stage_enabled("evaluate"):
        backtest_series = None
        if cfg.backtest_series and cfg.stage_enabled("backtest"):
            backtest_series = load_market_value_series(cfg.backtest_series)
        instruments = load_universe(cfg.universe)
        portfolios = load_portfolios(cfg.portfolios)
        mm = (
            load_migration_matrix(cfg.migration, recovery_rate=cfg.recovery_rate)
            if cfg.migration
            else None
        )
        curve_spec = load_curve_spec(cfg.curve) if cfg.curve else None
        payload = build_risk_payload(
            scenarios,
            instruments,
            portfolios,
            mm,
            curve_spec,
            min_scenarios=cfg.min_scenarios,
            backtest_series=backtest_series,
        )
        payload["config"] = stamp
        payload["format_version"] = REPORT_FORMAT_VERSION
        payload["seed"] = cfg.seed
        write_json(out_dir / "risk_report.json", payload)
        write_csv(
            out_dir / "risk_charges.csv",
            ["portfolio", "risk_charge", "var_absolute", "base_value"],
            (
                (
                    r["portfolio"],
                    repr(r["risk_charge"]),
                    repr(r["var_absolute"]),
                    repr(r["base_value"]),
                )
                for r in payload["portfolios"]
            ),
            stamp,
        )
        # plot-ready long format for box-style comparison figures
        write_csv(
            out_dir / "pnl_quantiles.csv",
            ["portfolio", "quantile", "value"],
            (
                (r["portfolio"], level, repr(value))
                for r in payload["portfolios"]
                for level, value in sorted(r["pnl_quantiles"].items(), key=lambda kv: float(kv[0]))
            ),
            stamp,
        )
        summary["stages"]["evaluate"] = {"report": "risk_report.json"}

    write_json(out_dir / "report.json", summary)
    return summary


def write_error_report(out_dir: str | Path, exc: Exception, stage: str = "") -> None:
    """Machine-readable error file; partial artifacts stay in place."""
    payload = {
        "error": type(exc).__name__,
        "message": str(exc),
        "stage": stage,
        "exit_code": getattr(exc, "exit_code", 1),
    }
    try:
        write_json(Path(out_dir) / "error.json", payload)
    except OSError:
        pass
