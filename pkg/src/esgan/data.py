"""Time-series ingestion and return preparation.

Raw risk-factor levels arrive as a dated CSV with one column per factor.
The preparation pipeline is: load -> forward-fill gaps -> rolling one-year
returns -> normalize each factor to zero mean and unit standard deviation.
Rates and spreads use absolute returns (differences), price-like factors
use relative returns, matching the usual internal-model convention in a
low-rate environment.
"""

from __future__ import annotations

import csv
import datetime
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DegenerateFactor,
    DuplicateDate,
    LeadingGap,
    MissingValues,
    NonMonotoneDates,
    NonPositiveLevel,
    UnknownFactor,
    UnparseableCell,
    WindowTooLarge,
)

#: Trading days per year used for rolling annual returns.
DEFAULT_WINDOW = 258


class ReturnKind(str, Enum):
    """How one-year returns are computed for a factor."""

    ABSOLUTE = "absolute"   # rates, credit spreads
    RELATIVE = "relative"   # equity, property indices


@dataclass(frozen=True)
class FactorSpec:
    """Declaration of a single risk factor."""

    factor_id: str
    return_kind: ReturnKind
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "id": self.factor_id,
            "return_kind": self.return_kind.value,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FactorSpec":
        try:
            kind = ReturnKind(d["return_kind"])
        except ValueError as exc:
            raise ConfigError(f"unknown return_kind {d.get('return_kind')!r}") from exc
        return cls(factor_id=d["id"], return_kind=kind, label=d.get("label", ""))


def load_factor_schema(path: str | Path) -> list[FactorSpec]:
    """Read a factor schema file: ``{"factors": [{"id", "return_kind", ...}]}``."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    factors = [FactorSpec.from_dict(d) for d in raw["factors"]]
    seen = set()
    for f in factors:
        if f.factor_id in seen:
            raise ConfigError(f"factor id {f.factor_id!r} declared twice")
        seen.add(f.factor_id)
    return factors


@dataclass
class TimeSeriesSet:
    """Dated raw factor levels. Missing cells are NaN until repaired."""

    factors: list[FactorSpec]
    dates: list[str]            # ISO-8601, strictly increasing
    values: np.ndarray          # T x F, float64

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    @property
    def n_factors(self) -> int:
        return self.values.shape[1]

    def factor_ids(self) -> list[str]:
        return [f.factor_id for f in self.factors]

    def column(self, factor_id: str) -> np.ndarray:
        try:
            j = self.factor_ids().index(factor_id)
        except ValueError as exc:
            raise UnknownFactor(f"no factor {factor_id!r}") from exc
        return self.values[:, j]


@dataclass(frozen=True)
class Scaling:
    """Per-factor affine scaling recorded by :func:`normalize`."""

    factors: tuple[FactorSpec, ...]
    means: np.ndarray
    stds: np.ndarray

    @property
    def n_factors(self) -> int:
        return len(self.factors)

    def to_dict(self) -> dict:
        return {
            "factors": [f.to_dict() for f in self.factors],
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scaling":
        return cls(
            factors=tuple(FactorSpec.from_dict(f) for f in d["factors"]),
            means=np.asarray(d["means"], dtype=float),
            stds=np.asarray(d["stds"], dtype=float),
        )


@dataclass
class ReturnMatrix:
    """Rolling one-year returns, one column per factor.

    ``scaling`` is None for raw returns and set once :func:`normalize`
    has been applied.
    """

    factors: list[FactorSpec]
    returns: np.ndarray         # (T - window) x F
    window: int
    scaling: Scaling | None = None

    @property
    def n_obs(self) -> int:
        return self.returns.shape[0]

    @property
    def n_factors(self) -> int:
        return self.returns.shape[1]

    def factor_ids(self) -> list[str]:
        return [f.factor_id for f in self.factors]


@dataclass
class ScenarioSet:
    """One-year factor shifts in natural units, one row per scenario."""

    factors: list[FactorSpec]
    values: np.ndarray          # n x F

    @property
    def n_scenarios(self) -> int:
        return self.values.shape[0]

    @property
    def n_factors(self) -> int:
        return self.values.shape[1]

    def factor_ids(self) -> list[str]:
        return [f.factor_id for f in self.factors]

    def column(self, factor_id: str) -> np.ndarray:
        try:
            j = self.factor_ids().index(factor_id)
        except ValueError as exc:
            raise UnknownFactor(f"no factor {factor_id!r}") from exc
        return self.values[:, j]

    def clamped(self, bounds: dict[str, tuple[float | None, float | None]]) -> "ScenarioSet":
        """Return a copy with per-factor shifts clipped to (lo, hi).

        Clamping happens here, after de-normalization, so bounds are given
        in natural units (e.g. an interest-rate downshift floor of -0.019).
        """
        out = self.values.copy()
        ids = self.factor_ids()
        for factor_id, (lo, hi) in bounds.items():
            if factor_id not in ids:
                raise UnknownFactor(f"clamp bound names unknown factor {factor_id!r}")
            j = ids.index(factor_id)
            out[:, j] = np.clip(out[:, j], lo, hi)
        return ScenarioSet(factors=self.factors, values=out)


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------


def _parse_date(token: str, line_no: int) -> str:
    try:
        return datetime.date.fromisoformat(token.strip()).isoformat()
    except ValueError as exc:
        raise UnparseableCell(f"line {line_no}: bad date {token!r}") from exc


def load_time_series(path: str | Path, schema: list[FactorSpec]) -> TimeSeriesSet:
    """Load a factor-level CSV against a declared schema.

    The file must have a ``date`` first column and exactly one column per
    schema factor (any order; output columns follow schema order). Empty
    cells are recorded as NaN and repaired later by :func:`fill_gaps`.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise UnparseableCell(f"{path}: empty file") from None
        if not header or header[0].strip() != "date":
            raise UnknownFactor(f"{path}: first column must be 'date', got {header[:1]}")
        file_ids = [h.strip() for h in header[1:]]
        schema_ids = [f.factor_id for f in schema]
        unknown = set(file_ids) - set(schema_ids)
        if unknown:
            raise UnknownFactor(f"{path}: columns not in schema: {sorted(unknown)}")
        missing = set(schema_ids) - set(file_ids)
        if missing:
            raise UnknownFactor(f"{path}: schema factors missing from file: {sorted(missing)}")
        if len(file_ids) != len(set(file_ids)):
            raise UnknownFactor(f"{path}: duplicated factor column in header")
        order = [file_ids.index(fid) for fid in schema_ids]

        dates: list[str] = []
        rows: list[list[float]] = []
        for line_no, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(file_ids) + 1:
                raise UnparseableCell(
                    f"{path} line {line_no}: expected {len(file_ids) + 1} cells, got {len(rec)}"
                )
            date = _parse_date(rec[0], line_no)
            if dates:
                if date == dates[-1]:
                    raise DuplicateDate(f"{path} line {line_no}: date {date} repeated")
                if date < dates[-1]:
                    raise NonMonotoneDates(
                        f"{path} line {line_no}: date {date} before {dates[-1]}"
                    )
            dates.append(date)
            row = []
            for j in order:
                cell = rec[1 + j].strip()
                if cell == "":
                    row.append(np.nan)
                    continue
                try:
                    value = float(cell)
                except ValueError as exc:
                    raise UnparseableCell(
                        f"{path} line {line_no}: bad number {cell!r} in column {schema_ids[order.index(j)]!r}"
                    ) from exc
                if not np.isfinite(value):
                    # "nan"/"inf" strings parse but violate the finite-levels contract
                    raise UnparseableCell(
                        f"{path} line {line_no}: non-finite value {cell!r}"
                    )
                row.append(value)
            rows.append(row)

    values = np.asarray(rows, dtype=float).reshape(len(rows), len(schema_ids))
    return TimeSeriesSet(factors=list(schema), dates=dates, values=values)


def fill_gaps(ts: TimeSeriesSet) -> TimeSeriesSet:
    """Forward-fill missing cells with the nearest preceding observation.

    A column whose first entry is missing cannot be repaired and raises
    :class:`LeadingGap`. Idempotent on already-complete data.
    """
    values = ts.values.copy()
    for j, factor in enumerate(ts.factors):
        col = values[:, j]
        if col.size and np.isnan(col[0]):
            raise LeadingGap(f"factor {factor.factor_id!r} starts with a missing value")
        mask = np.isnan(col)
        if not mask.any():
            continue
        # index of the most recent non-missing observation for each row
        idx = np.where(~mask, np.arange(col.size), 0)
        np.maximum.accumulate(idx, out=idx)
        values[:, j] = col[idx]
    return TimeSeriesSet(factors=list(ts.factors), dates=list(ts.dates), values=values)


def compute_rolling_returns(ts: TimeSeriesSet, window: int = DEFAULT_WINDOW) -> ReturnMatrix:
    """Rolling annual returns over a ``window`` of trading days.

    Relative factors: s[t+w] / s[t] - 1. Absolute factors: s[t+w] - s[t].
    Output has T - window rows. Requires gap-free data.
    """
    t_obs = ts.n_obs
    if window <= 0:
        raise ConfigError(f"window must be positive, got {window}")
    if t_obs <= window:
        raise WindowTooLarge(f"series has {t_obs} observations, window {window}")
    if np.isnan(ts.values).any():
        raise MissingValues("series contains missing cells; run fill_gaps first")

    returns = np.empty((t_obs - window, ts.n_factors), dtype=float)
    head = ts.values[:-window, :]
    tail = ts.values[window:, :]
    for j, factor in enumerate(ts.factors):
        if factor.return_kind is ReturnKind.RELATIVE:
            if np.any(ts.values[:, j] <= 0.0):
                raise NonPositiveLevel(
                    f"relative factor {factor.factor_id!r} has non-positive levels"
                )
            returns[:, j] = tail[:, j] / head[:, j] - 1.0
        else:
            returns[:, j] = tail[:, j] - head[:, j]
    return ReturnMatrix(factors=list(ts.factors), returns=returns, window=window)


def normalize(rm: ReturnMatrix) -> ReturnMatrix:
    """Scale each factor column to zero mean, unit standard deviation.

    Uses the population (1/N) standard deviation so the recorded scaling
    inverts exactly. Raises :class:`DegenerateFactor` on constant columns.
    """
    means = rm.returns.mean(axis=0)
    stds = rm.returns.std(axis=0)
    for j, factor in enumerate(rm.factors):
        if stds[j] <= 0.0:
            raise DegenerateFactor(f"factor {factor.factor_id!r} has zero variance")
    scaling = Scaling(factors=tuple(rm.factors), means=means, stds=stds)
    normalized = (rm.returns - means) / stds
    return ReturnMatrix(
        factors=list(rm.factors), returns=normalized, window=rm.window, scaling=scaling
    )


def denormalize(x: np.ndarray, scaling: Scaling) -> np.ndarray:
    """Invert :func:`normalize`: x * std + mean, column-wise."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != scaling.n_factors:
        raise ValueError(
            f"matrix has {x.shape[-1] if x.ndim else 0} columns, scaling expects {scaling.n_factors}"
        )
    return x * scaling.stds + scaling.means
