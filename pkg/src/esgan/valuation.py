"""Instrument valuation under scenario shifts.

Zero-coupon bonds reprice off additive rate and spread shifts with an
expected-loss haircut from a rating migration matrix; equity and property
scale with their index's relative shift; liability legs discount on the
re-extrapolated risk-free curve. All scenario values are expressed as a
ratio to the unshocked price times the instrument's base market value,
so instruments quoted away from par are handled.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping

import numpy as np

from .curve import YieldCurve, YieldCurveSpec, calibrate_alpha, extrapolate_curve, shifted_spec
from .errors import (
    ConfigError,
    DegenerateYield,
    UnknownRating,
    UnresolvedFactor,
    ValuationError,
)


class InstrumentKind(str, Enum):
    ZERO_COUPON_BOND = "zero_coupon_bond"
    EQUITY = "equity"
    PROPERTY = "property"
    LIABILITY_LEG = "liability_leg"


@dataclass(frozen=True)
class Instrument:
    """Valuation recipe for one synthetic instrument.

    Bonds need maturity, base rate/spread and the factor ids carrying
    their shifts; equity and property need ``market_factor``; liability
    legs need only maturity (their duration) since discounting comes from
    the curve spec.
    """

    id: str
    kind: InstrumentKind
    base_market_value: float
    maturity: float | None = None
    rate_factor: str | None = None
    spread_factor: str | None = None
    market_factor: str | None = None
    base_rate: float = 0.0
    base_spread: float = 0.0
    rating: str | None = None

    def __post_init__(self):
        if not np.isfinite(self.base_market_value):
            raise ConfigError(f"{self.id}: base market value must be finite")
        dated = (InstrumentKind.ZERO_COUPON_BOND, InstrumentKind.LIABILITY_LEG)
        if self.kind in dated:
            if self.maturity is None or self.maturity <= 0:
                raise ConfigError(f"{self.id}: {self.kind.value} needs a positive maturity")
        if self.kind in (InstrumentKind.EQUITY, InstrumentKind.PROPERTY):
            if not self.market_factor:
                raise ConfigError(f"{self.id}: {self.kind.value} needs a market_factor")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "base_market_value": self.base_market_value,
            "maturity": self.maturity,
            "rate_factor": self.rate_factor,
            "spread_factor": self.spread_factor,
            "market_factor": self.market_factor,
            "base_rate": self.base_rate,
            "base_spread": self.base_spread,
            "rating": self.rating,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Instrument":
        try:
            kind = InstrumentKind(d["kind"])
        except ValueError as exc:
            raise ConfigError(f"unknown instrument kind {d.get('kind')!r}") from exc
        return cls(
            id=d["id"],
            kind=kind,
            base_market_value=float(d["base_market_value"]),
            maturity=None if d.get("maturity") is None else float(d["maturity"]),
            rate_factor=d.get("rate_factor"),
            spread_factor=d.get("spread_factor"),
            market_factor=d.get("market_factor"),
            base_rate=float(d.get("base_rate", 0.0)),
            base_spread=float(d.get("base_spread", 0.0)),
            rating=d.get("rating"),
        )


def load_universe(path: str | Path) -> list[Instrument]:
    """Read the instrument universe: ``{"instruments": [...]}``."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    instruments = [Instrument.from_dict(d) for d in raw["instruments"]]
    seen = set()
    for instr in instruments:
        if instr.id in seen:
            raise ConfigError(f"instrument id {instr.id!r} declared twice")
        seen.add(instr.id)
    return instruments


@dataclass
class MigrationMatrix:
    """One-year rating transition probabilities, last column = default."""

    ratings: list[str]
    probabilities: np.ndarray      # R x (R + 1), row-stochastic
    recovery_rate: float = 0.45

    def __post_init__(self):
        r = len(self.ratings)
        if self.probabilities.shape != (r, r + 1):
            raise ConfigError(
                f"migration matrix must be {r}x{r + 1}, got {self.probabilities.shape}"
            )
        if np.any(self.probabilities < 0.0) or np.any(self.probabilities > 1.0):
            raise ConfigError("migration probabilities must lie in [0, 1]")
        sums = self.probabilities.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ConfigError(f"migration rows must sum to 1, got {sums}")
        if not 0.0 <= self.recovery_rate <= 1.0:
            raise ConfigError("recovery rate must lie in [0, 1]")

    def row(self, rating: str) -> np.ndarray:
        try:
            i = self.ratings.index(rating)
        except ValueError as exc:
            raise UnknownRating(f"rating {rating!r} not in migration matrix") from exc
        return self.probabilities[i]


def load_migration_matrix(path: str | Path, recovery_rate: float = 0.45) -> MigrationMatrix:
    """CSV with header ``rating,<rating...>,default`` and one row per rating."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty migration matrix")
    header = [c.strip() for c in rows[0]]
    if header[0] != "rating" or header[-1] != "default":
        raise ConfigError(f"{path}: header must be rating,<ratings...>,default")
    ratings = header[1:-1]
    matrix = []
    row_ratings = []
    for rec in rows[1:]:
        if not rec or all(not c.strip() for c in rec):
            continue
        row_ratings.append(rec[0].strip())
        matrix.append([float(c) for c in rec[1:]])
    if row_ratings != ratings:
        raise ConfigError(f"{path}: row order {row_ratings} must match columns {ratings}")
    return MigrationMatrix(
        ratings=ratings, probabilities=np.asarray(matrix, dtype=float),
        recovery_rate=recovery_rate,
    )


# --------------------------------------------------------------------------
# pricing primitives
# --------------------------------------------------------------------------


def zero_coupon_value(r0: float, dr, s0: float, ds, tau: float):
    """Price per unit notional: 1 / (1 + r0 + dr + s0 + ds)^tau.

    Accepts scalar or vector shifts; raises :class:`DegenerateYield` when
    any total yield is at or below -100%.
    """
    total = 1.0 + r0 + np.asarray(dr, dtype=float) + s0 + np.asarray(ds, dtype=float)
    if np.any(total <= 0.0):
        raise DegenerateYield("total yield at or below -100%")
    out = total ** (-float(tau))
    return float(out) if out.ndim == 0 else out


def scale_market_value(base_mv: float, relative_shift):
    """base_mv * (1 + relative_shift); vector shifts give vector values."""
    out = base_mv * (1.0 + np.asarray(relative_shift, dtype=float))
    return float(out) if out.ndim == 0 else out


def scaled_migration_row(
    base_spread: float, scenario_spread: float, rating: str, mm: MigrationMatrix
) -> np.ndarray:
    """Transition row with downgrade and default mass scaled by the spread ratio.

    The scaling factor is max(scenario_spread / base_spread, 0). Scaled
    downgrade+default mass is capped at 1 and the stay-or-upgrade mass
    absorbs the complement (rescaled proportionally), so the row remains
    a probability distribution.
    """
    if base_spread <= 0.0:
        raise ValuationError(f"base spread must be positive, got {base_spread}")
    row = mm.row(rating).copy()
    i = mm.ratings.index(rating)
    down = np.zeros(row.size, dtype=bool)
    down[i + 1 :] = True                      # worse ratings and the default column
    sigma = max(scenario_spread / base_spread, 0.0)

    scaled_down = sigma * row[down]
    total_down = scaled_down.sum()
    if total_down > 1.0:
        scaled_down /= total_down
        total_down = 1.0
    up_stay = row[~down]
    up_stay_total = up_stay.sum()
    if up_stay_total > 0.0:
        up_stay = up_stay * ((1.0 - total_down) / up_stay_total)
    else:
        # all mass was downgrade/default: park the complement on "stay"
        up_stay = up_stay.copy()
        up_stay[i] = 1.0 - total_down
    out = np.empty_like(row)
    out[down] = scaled_down
    out[~down] = up_stay
    return np.clip(out, 0.0, 1.0)


def migration_adjustment(
    base_spread: float, scenario_spread: float, rating: str, mm: MigrationMatrix
) -> float:
    """Value multiplier 1 - p_default_scaled * (1 - recovery), in (0, 1]."""
    row = scaled_migration_row(base_spread, scenario_spread, rating, mm)
    return float(1.0 - row[-1] * (1.0 - mm.recovery_rate))


def migration_multiplier_vector(
    base_spread: float, scenario_spreads: np.ndarray, rating: str, mm: MigrationMatrix
) -> np.ndarray:
    """Vectorized :func:`migration_adjustment` over many scenario spreads.

    Uses the closed form of the scaling rule: the scaled default
    probability is p_default * min(sigma, 1 / downgrade_mass).
    """
    if base_spread <= 0.0:
        raise ValuationError(f"base spread must be positive, got {base_spread}")
    row = mm.row(rating)
    i = mm.ratings.index(rating)
    down_total = row[i + 1 :].sum()
    p_default = row[-1]
    sigma = np.maximum(np.asarray(scenario_spreads, dtype=float) / base_spread, 0.0)
    cap = np.inf if down_total <= 0.0 else 1.0 / down_total
    p_scaled = p_default * np.minimum(sigma, cap)
    return 1.0 - p_scaled * (1.0 - mm.recovery_rate)


def discount_liability(notional: float, duration: float, curve: YieldCurve) -> float:
    """Present value of a zero-bond liability profile: notional * DF(duration)."""
    return notional * curve.discount_factor(duration)


class CurveContext:
    """Base curve plus scenario re-extrapolation with a frozen alpha.

    Alpha is calibrated once on the base curve and reused for scenario
    curves, mirroring the practice of holding the published convergence
    speed fixed within a valuation run.
    """

    def __init__(self, spec: YieldCurveSpec):
        self.spec = spec
        self.alpha = spec.alpha if spec.alpha is not None else calibrate_alpha(spec)
        self.base_curve = extrapolate_curve(spec, alpha=self.alpha)

    def scenario_curve(self, shifts: Mapping[str, float]) -> YieldCurve:
        return extrapolate_curve(shifted_spec(self.spec, dict(shifts)), alpha=self.alpha)


def _factor_shift(scenario: Mapping[str, float], factor_id: str | None, instrument_id: str):
    if factor_id is None:
        return 0.0
    try:
        return scenario[factor_id]
    except KeyError as exc:
        raise UnresolvedFactor(
            f"instrument {instrument_id!r} references factor {factor_id!r} "
            "absent from the scenario"
        ) from exc


def instrument_value(
    instr: Instrument,
    scenario: Mapping[str, float],
    mm: MigrationMatrix | None = None,
    curves: CurveContext | None = None,
) -> float:
    """Value of one instrument under one scenario (factor id -> shift).

    Scalar reference implementation; the portfolio engine vectorizes the
    same arithmetic across scenarios.
    """
    if instr.kind is InstrumentKind.ZERO_COUPON_BOND:
        dr = _factor_shift(scenario, instr.rate_factor, instr.id)
        ds = _factor_shift(scenario, instr.spread_factor, instr.id)
        base = zero_coupon_value(instr.base_rate, 0.0, instr.base_spread, 0.0, instr.maturity)
        shocked = zero_coupon_value(instr.base_rate, dr, instr.base_spread, ds, instr.maturity)
        value = instr.base_market_value * shocked / base
        if instr.rating is not None:
            if mm is None:
                raise ConfigError(f"{instr.id}: rated bond needs a migration matrix")
            value *= migration_adjustment(
                instr.base_spread, instr.base_spread + ds, instr.rating, mm
            )
        return float(value)

    if instr.kind in (InstrumentKind.EQUITY, InstrumentKind.PROPERTY):
        shift = _factor_shift(scenario, instr.market_factor, instr.id)
        return float(scale_market_value(instr.base_market_value, shift))

    if instr.kind is InstrumentKind.LIABILITY_LEG:
        if curves is None:
            raise ConfigError(f"{instr.id}: liability leg needs a curve context")
        df_base = curves.base_curve.discount_factor(instr.maturity)
        df_scen = curves.scenario_curve(scenario).discount_factor(instr.maturity)
        return float(instr.base_market_value * df_scen / df_base)

    raise ConfigError(f"unhandled instrument kind {instr.kind}")
