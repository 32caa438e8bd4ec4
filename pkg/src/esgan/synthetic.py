"""Synthetic market data for self-contained demos and tests.

Real risk-factor histories are licensed, so the engine ships a generator
of correlated random-walk levels: geometric walks for relative-return
factors (indices), arithmetic walks for absolute-return factors (rates,
spreads). Daily increments share a single common component, giving every
factor pair the same target correlation.
"""

from __future__ import annotations

import csv
import datetime
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import FactorSpec, ReturnKind
from .errors import ConfigError

#: Generating parameters, fixed and documented here: daily volatilities and
#: starting levels per return kind.
RELATIVE_DAILY_VOL = 0.01
RELATIVE_START_LEVEL = 100.0
ABSOLUTE_DAILY_VOL = 0.0004
ABSOLUTE_START_LEVEL = 0.02
ABSOLUTE_DRIFT = 0.0
RELATIVE_DRIFT = 0.0


@dataclass(frozen=True)
class SyntheticSpec:
    factors: tuple[FactorSpec, ...]
    days: int
    correlation: float = 0.5
    start_date: str = "2002-03-28"

    def __post_init__(self):
        if self.days < 2:
            raise ConfigError("need at least 2 days of levels")
        if not 0.0 <= self.correlation <= 1.0:
            raise ConfigError(f"correlation must lie in [0, 1], got {self.correlation}")


def default_factors(n_relative: int, n_absolute: int) -> tuple[FactorSpec, ...]:
    factors = [
        FactorSpec(f"index_{i}", ReturnKind.RELATIVE, label=f"synthetic index {i}")
        for i in range(n_relative)
    ]
    factors += [
        FactorSpec(f"rate_{i}", ReturnKind.ABSOLUTE, label=f"synthetic rate {i}")
        for i in range(n_absolute)
    ]
    return tuple(factors)


def business_dates(start: str, n: int) -> list[str]:
    """n consecutive weekdays from ``start`` (inclusive if a weekday)."""
    day = datetime.date.fromisoformat(start)
    out = []
    while len(out) < n:
        if day.weekday() < 5:
            out.append(day.isoformat())
        day += datetime.timedelta(days=1)
    return out


def synthetic_levels(spec: SyntheticSpec, seed: int) -> np.ndarray:
    """Correlated level paths, shape (days, n_factors)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    n_factors = len(spec.factors)
    rho = spec.correlation
    common = rng.normal(size=(spec.days - 1, 1))
    own = rng.normal(size=(spec.days - 1, n_factors))
    increments = np.sqrt(rho) * common + np.sqrt(1.0 - rho) * own

    levels = np.empty((spec.days, n_factors))
    for j, factor in enumerate(spec.factors):
        if factor.return_kind is ReturnKind.RELATIVE:
            steps = RELATIVE_DRIFT + RELATIVE_DAILY_VOL * increments[:, j]
            path = RELATIVE_START_LEVEL * np.exp(np.concatenate([[0.0], np.cumsum(steps)]))
        else:
            steps = ABSOLUTE_DRIFT + ABSOLUTE_DAILY_VOL * increments[:, j]
            path = ABSOLUTE_START_LEVEL + np.concatenate([[0.0], np.cumsum(steps)])
        levels[:, j] = path
    return levels


def make_synthetic_dataset(
    path: str | Path,
    spec: SyntheticSpec,
    seed: int = 0,
) -> dict:
    """Write a level CSV loadable by :func:`esgan.data.load_time_series`.

    Returns the generating parameters for run metadata.
    """
    levels = synthetic_levels(spec, seed)
    dates = business_dates(spec.start_date, spec.days)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", *[f.factor_id for f in spec.factors]])
        for i, d in enumerate(dates):
            writer.writerow([d, *[repr(float(x)) for x in levels[i]]])
    return {
        "days": spec.days,
        "factors": [f.to_dict() for f in spec.factors],
        "correlation": spec.correlation,
        "seed": seed,
        "relative_daily_vol": RELATIVE_DAILY_VOL,
        "absolute_daily_vol": ABSOLUTE_DAILY_VOL,
        "relative_drift": RELATIVE_DRIFT,
        "absolute_drift": ABSOLUTE_DRIFT,
        "start_levels": {
            "relative": RELATIVE_START_LEVEL,
            "absolute": ABSOLUTE_START_LEVEL,
        },
    }
