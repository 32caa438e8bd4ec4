"""Portfolio aggregation and the headline risk metrics.

The risk charge is the 99.5% one-year Value-at-Risk of the scenario P&L
distribution divided by portfolio market value. Around it sit factor
shocks (0.5%/99.5% quantiles), a rolling one-year worst-case backtest
with its implied percentile, joint quantile exceedance for dependency
checks, and the coefficient of quartile variation for run-to-run
stability.

Quantiles use the lower order statistic throughout: sorted ascending,
index ceil(q * N) - 1, no interpolation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .curve import YieldCurveSpec, batch_discount_factors, calibrate_alpha
from .data import ReturnMatrix, ScenarioSet
from .errors import (
    ConfigError,
    InsufficientHistory,
    TrainingError,
    UndefinedCQV,
    UnknownInstrument,
    UnresolvedFactor,
    ZeroBaseValue,
)
from .gan.config import GanConfig
from .gan.model import generate_scenarios
from .gan.train import train_gan
from .validation import derive_seed
from .valuation import (
    Instrument,
    InstrumentKind,
    MigrationMatrix,
    migration_multiplier_vector,
    zero_coupon_value,
)

SIDE_ASSET = "asset"
SIDE_LIABILITY = "liability"


@dataclass(frozen=True)
class Holding:
    instrument_id: str
    weight: float
    side: str = SIDE_ASSET

    def __post_init__(self):
        if self.side not in (SIDE_ASSET, SIDE_LIABILITY):
            raise ConfigError(f"holding side must be asset or liability, got {self.side!r}")


@dataclass(frozen=True)
class Portfolio:
    id: str
    holdings: tuple[Holding, ...]

    @classmethod
    def from_dict(cls, d: dict) -> "Portfolio":
        holdings = tuple(
            Holding(
                instrument_id=h["instrument"],
                weight=float(h["weight"]),
                side=h.get("side", SIDE_ASSET),
            )
            for h in d["holdings"]
        )
        return cls(id=d["id"], holdings=holdings)


def load_portfolios(path: str | Path) -> list[Portfolio]:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return [Portfolio.from_dict(d) for d in raw["portfolios"]]


# --------------------------------------------------------------------------
# quantiles and shocks
# --------------------------------------------------------------------------


def empirical_quantile(values, q: float) -> float:
    """Lower-order-statistic quantile: sorted ascending, index ceil(qN) - 1.

    The tiny slack inside ceil guards against floating-point products
    like 0.005 * 1000 landing a hair above the intended integer.
    """
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("empty sample")
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")
    k = math.ceil(q * values.size - 1e-9)
    k = min(max(k, 1), values.size)
    return float(np.partition(values, k - 1)[k - 1])


TWO_SIDED = "two_sided"
ONE_SIDED_UP = "one_sided_up"


def factor_shock(column, sided: str = TWO_SIDED):
    """Absolute one-year shock(s) of a risk factor.

    Two-sided: (0.5% quantile, 99.5% quantile); one-sided: the 99.5%
    quantile alone (spread-like factors).
    """
    if sided == TWO_SIDED:
        return empirical_quantile(column, 0.005), empirical_quantile(column, 0.995)
    if sided == ONE_SIDED_UP:
        return empirical_quantile(column, 0.995)
    raise ValueError(f"unknown sidedness {sided!r}")


def joint_quantile_exceedance(x, y, q: float = 0.8) -> float:
    """Probability that both paired samples lie strictly above their own
    q-quantile. Independence gives (1-q)^2, comonotone pairs 1-q,
    countermonotone pairs 0.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError(f"paired samples differ in length: {x.size} vs {y.size}")
    tx = empirical_quantile(x, q)
    ty = empirical_quantile(y, q)
    return float(np.mean((x > tx) & (y > ty)))


def cqv(values) -> float:
    """Coefficient of quartile variation (Q3 - Q1) / (Q3 + Q1)."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size < 4:
        raise ValueError(f"need at least 4 values, got {values.size}")
    q1 = empirical_quantile(values, 0.25)
    q3 = empirical_quantile(values, 0.75)
    if q3 + q1 == 0.0:
        raise UndefinedCQV("Q3 + Q1 is zero")
    return (q3 - q1) / (q3 + q1)


# --------------------------------------------------------------------------
# scenario valuation
# --------------------------------------------------------------------------


def instrument_value_matrix(
    instruments: Sequence[Instrument],
    scenarios: ScenarioSet,
    mm: MigrationMatrix | None = None,
    curve_spec: YieldCurveSpec | None = None,
) -> np.ndarray:
    """Scenario values for every instrument, shape (n_scenarios, n_instruments).

    Vectorizes the scalar :func:`esgan.valuation.instrument_value`
    arithmetic column-wise; liability legs share one batched curve
    re-extrapolation with alpha frozen at its base-curve calibration.
    """
    ids = scenarios.factor_ids()
    n = scenarios.n_scenarios
    values = np.empty((n, len(instruments)))

    def shift_column(factor_id: str | None, instrument_id: str) -> np.ndarray:
        if factor_id is None:
            return np.zeros(n)
        if factor_id not in ids:
            raise UnresolvedFactor(
                f"instrument {instrument_id!r} references factor {factor_id!r} "
                "absent from the scenario set"
            )
        return scenarios.values[:, ids.index(factor_id)]

    liability_columns = [
        (j, instr) for j, instr in enumerate(instruments)
        if instr.kind is InstrumentKind.LIABILITY_LEG
    ]

    for j, instr in enumerate(instruments):
        if instr.kind is InstrumentKind.ZERO_COUPON_BOND:
            dr = shift_column(instr.rate_factor, instr.id)
            ds = shift_column(instr.spread_factor, instr.id)
            base = zero_coupon_value(instr.base_rate, 0.0, instr.base_spread, 0.0, instr.maturity)
            shocked = zero_coupon_value(instr.base_rate, dr, instr.base_spread, ds, instr.maturity)
            col = instr.base_market_value * shocked / base
            if instr.rating is not None:
                if mm is None:
                    raise ConfigError(f"{instr.id}: rated bond needs a migration matrix")
                col = col * migration_multiplier_vector(
                    instr.base_spread, instr.base_spread + ds, instr.rating, mm
                )
            values[:, j] = col
        elif instr.kind in (InstrumentKind.EQUITY, InstrumentKind.PROPERTY):
            shift = shift_column(instr.market_factor, instr.id)
            values[:, j] = instr.base_market_value * (1.0 + shift)
        elif instr.kind is InstrumentKind.LIABILITY_LEG:
            values[:, j] = 0.0   # filled below in one batch
        else:
            raise ConfigError(f"unhandled instrument kind {instr.kind}")

    if liability_columns:
        if curve_spec is None:
            raise ConfigError("liability legs need a curve spec")
        alpha = curve_spec.alpha if curve_spec.alpha is not None else calibrate_alpha(curve_spec)
        base_rates = curve_spec.rates
        shift_matrix = np.zeros((n, base_rates.size))
        for k, lr in enumerate(curve_spec.liquid_rates):
            if lr.factor_id is not None:
                shift_matrix[:, k] = shift_column(lr.factor_id, "curve")
        durations = np.array([instr.maturity for _, instr in liability_columns])
        df_scen = batch_discount_factors(
            curve_spec, base_rates + shift_matrix, durations, alpha
        )
        df_base = batch_discount_factors(
            curve_spec, base_rates[None, :], durations, alpha
        )[0]
        for k, (j, instr) in enumerate(liability_columns):
            values[:, j] = instr.base_market_value * df_scen[:, k] / df_base[k]

    return values


def _universe_index(instruments: Sequence[Instrument]) -> dict[str, int]:
    return {instr.id: j for j, instr in enumerate(instruments)}


def portfolio_scenario_values(
    pf: Portfolio,
    instruments: Sequence[Instrument],
    value_matrix: np.ndarray,
) -> tuple[np.ndarray, float, float]:
    """(net scenario values, net base value, asset-side base value).

    Liability holdings enter with a negative sign, so an increase in
    liability value is a loss.
    """
    index = _universe_index(instruments)
    n = value_matrix.shape[0]
    net = np.zeros(n)
    base = 0.0
    asset_base = 0.0
    for h in pf.holdings:
        if h.instrument_id not in index:
            raise UnknownInstrument(
                f"portfolio {pf.id!r} references unknown instrument {h.instrument_id!r}"
            )
        j = index[h.instrument_id]
        sign = 1.0 if h.side == SIDE_ASSET else -1.0
        net += sign * h.weight * value_matrix[:, j]
        base += sign * h.weight * instruments[j].base_market_value
        if h.side == SIDE_ASSET:
            asset_base += h.weight * instruments[j].base_market_value
    return net, base, asset_base


@dataclass
class RiskChargeResult:
    portfolio_id: str
    risk_charge: float             # VaR / |net base value|
    var_absolute: float
    base_value: float
    asset_base_value: float
    risk_charge_asset_base: float  # VaR / asset-side base value
    pnl_quantiles: dict = field(default_factory=dict)


PNL_SUMMARY_LEVELS = (0.005, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 0.995)


def risk_charge(
    pf: Portfolio,
    scenarios: ScenarioSet,
    instruments: Sequence[Instrument],
    mm: MigrationMatrix | None = None,
    curve_spec: YieldCurveSpec | None = None,
    q: float = 0.995,
    min_scenarios: int = 200,
    value_matrix: np.ndarray | None = None,
) -> RiskChargeResult:
    """99.5% VaR of the scenario loss distribution over base market value.

    ``value_matrix`` lets callers reuse instrument values across
    portfolios; otherwise it is computed here.
    """
    if scenarios.n_scenarios < min_scenarios:
        raise ValueError(
            f"{scenarios.n_scenarios} scenarios; need at least {min_scenarios} "
            "for a meaningful tail quantile"
        )
    if value_matrix is None:
        value_matrix = instrument_value_matrix(instruments, scenarios, mm, curve_spec)
    net, base, asset_base = portfolio_scenario_values(pf, instruments, value_matrix)
    if base == 0.0:
        raise ZeroBaseValue(f"portfolio {pf.id!r} has zero net base value")
    losses = base - net
    var_absolute = empirical_quantile(losses, q)
    pnl = net - base
    quantiles = {str(level): empirical_quantile(pnl, level) for level in PNL_SUMMARY_LEVELS}
    return RiskChargeResult(
        portfolio_id=pf.id,
        risk_charge=var_absolute / abs(base),
        var_absolute=var_absolute,
        base_value=base,
        asset_base_value=asset_base,
        risk_charge_asset_base=(var_absolute / asset_base) if asset_base > 0 else float("nan"),
        pnl_quantiles=quantiles,
    )


# --------------------------------------------------------------------------
# backtest
# --------------------------------------------------------------------------


@dataclass
class BacktestResult:
    worst_case: float
    date: str
    evaluated_dates: list[str]


def month_end_dates(dates: Sequence[str]) -> list[str]:
    """Last available date per calendar month, in order."""
    last: dict[str, str] = {}
    for d in dates:
        last[d[:7]] = d
    return [last[m] for m in sorted(last)]


def worst_case_backtest(
    dates: Sequence[str],
    market_values: Sequence[float],
    eval_dates: Sequence[str] | None = None,
    window: int = 258,
) -> BacktestResult:
    """Minimum rolling one-year relative return over the evaluation dates.

    ``eval_dates`` defaults to the month-end dates of the series that
    have a full look-back window; explicitly supplied dates without one
    raise :class:`InsufficientHistory`.
    """
    values = np.asarray(market_values, dtype=float)
    if len(dates) != values.size:
        raise ValueError("dates and market values differ in length")
    position = {d: i for i, d in enumerate(dates)}
    if eval_dates is None:
        eval_dates = [d for d in month_end_dates(dates) if position[d] >= window]
        if not eval_dates:
            raise InsufficientHistory(
                f"series of {values.size} points has no month-end with a {window}-day window"
            )
    worst = np.inf
    worst_date = ""
    evaluated = []
    for d in eval_dates:
        if d not in position:
            raise InsufficientHistory(f"evaluation date {d} not in the series")
        i = position[d]
        if i < window:
            raise InsufficientHistory(f"evaluation date {d} lacks a {window}-day look-back")
        ret = values[i] / values[i - window] - 1.0
        evaluated.append(d)
        if ret < worst:
            worst = ret
            worst_date = d
    return BacktestResult(worst_case=float(worst), date=worst_date, evaluated_dates=evaluated)


def implied_percentile(worst_case: float, scenario_returns) -> float:
    """Empirical CDF of scenario relative returns evaluated at the worst case."""
    returns = np.asarray(scenario_returns, dtype=float).ravel()
    if returns.size == 0:
        raise ValueError("empty scenario return distribution")
    return float(np.mean(returns <= worst_case))


# --------------------------------------------------------------------------
# stability study
# --------------------------------------------------------------------------


@dataclass
class StabilityResult:
    factor_ids: list[str]
    cqv_down: np.ndarray           # CQV of |0.5% shock| per factor
    cqv_up: np.ndarray             # CQV of |99.5% shock| per factor
    shocks_down: np.ndarray        # (n_sets, F) raw quantiles
    shocks_up: np.ndarray


def cqv_table_from_shock_sets(
    shocks_down: np.ndarray, shocks_up: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Column-wise CQV of absolute shock magnitudes.

    Down shocks are typically negative, so the coefficient is taken on
    absolute values to keep it sign-free, the way down shifts are
    reported in comparison studies.
    """
    down = np.array([cqv(np.abs(shocks_down[:, j])) for j in range(shocks_down.shape[1])])
    up = np.array([cqv(np.abs(shocks_up[:, j])) for j in range(shocks_up.shape[1])])
    return down, up


def stability_study(
    config: GanConfig,
    data: ReturnMatrix,
    n_trainings: int = 4,
    n_generations_each: int = 5,
    n_scenarios: int = 50_000,
    base_seed: int | None = None,
) -> StabilityResult:
    """Shock stability over repeated trainings and generations.

    Trains ``n_trainings`` models (seeds derived from (base, t)), draws
    ``n_generations_each`` scenario sets from each (seeds derived from
    (base, t, g)), and reports the CQV of the 0.5%/99.5% shocks per
    factor over all sets. A diverged training aborts the study; partial
    shock sets are attached to the raised error.
    """
    if data.scaling is None:
        raise ConfigError("stability study needs a normalized return matrix")
    base = config.seed if base_seed is None else base_seed
    factor_ids = data.factor_ids()
    down_rows: list[np.ndarray] = []
    up_rows: list[np.ndarray] = []
    for t in range(n_trainings):
        seeded = config.with_seed(derive_seed(base, t))
        try:
            model = train_gan(seeded, data)
        except TrainingError as exc:
            exc.partial_shocks = (np.array(down_rows), np.array(up_rows))
            raise
        for g in range(n_generations_each):
            scenarios = generate_scenarios(
                model, n_scenarios, seed=derive_seed(base, t, g)
            )
            down = np.empty(len(factor_ids))
            up = np.empty(len(factor_ids))
            for j in range(len(factor_ids)):
                down[j], up[j] = factor_shock(scenarios.values[:, j], TWO_SIDED)
            down_rows.append(down)
            up_rows.append(up)
    shocks_down = np.vstack(down_rows)
    shocks_up = np.vstack(up_rows)
    cqv_down, cqv_up = cqv_table_from_shock_sets(shocks_down, shocks_up)
    return StabilityResult(
        factor_ids=factor_ids,
        cqv_down=cqv_down,
        cqv_up=cqv_up,
        shocks_down=shocks_down,
        shocks_up=shocks_up,
    )
