"""Risk-free curve construction with Smith-Wilson extrapolation.

Liquid zero rates (annually compounded, credit-risk adjustment already
deducted here) are fitted exactly; beyond the last liquid point the
one-year forward rate converges to the ultimate forward rate. Internals
work with continuous compounding (omega = ln(1 + UFR)) and convert back
to annual zero rates on an annual grid out to 121 years.

The convergence speed alpha is bisected to the smallest value, floored
at ``alpha_min``, for which the one-year forward rate at the convergence
maturity is within ``alpha_tolerance`` of the UFR.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, CurveFitError, ValuationError

CURVE_GRID_YEARS = 121


@dataclass(frozen=True)
class LiquidRate:
    maturity: float
    rate: float                    # annual compounding, before CRA deduction
    factor_id: str | None = None   # scenario factor shifting this rate

    def to_dict(self) -> dict:
        return {"maturity": self.maturity, "rate": self.rate, "factor": self.factor_id}


@dataclass(frozen=True)
class YieldCurveSpec:
    liquid_rates: tuple[LiquidRate, ...]
    cra: float = 0.001                  # credit risk adjustment, 10bp
    llp: float = 20.0                   # last liquid point
    ufr: float = 0.039
    convergence_maturity: float = 60.0
    alpha: float | None = None          # fixed alpha; None -> calibrate
    alpha_min: float = 0.05
    alpha_tolerance: float = 1e-4       # 1bp on the forward at convergence

    def __post_init__(self):
        mats = [lr.maturity for lr in self.liquid_rates]
        if not mats:
            raise ConfigError("curve spec needs at least one liquid rate")
        if any(m <= 0 for m in mats) or any(b <= a for a, b in zip(mats, mats[1:])):
            raise ConfigError("liquid maturities must be positive and strictly increasing")
        if self.llp > self.convergence_maturity:
            raise ConfigError("last liquid point beyond the convergence maturity")
        if self.convergence_maturity + 1 > CURVE_GRID_YEARS:
            raise ConfigError(f"convergence maturity must fit the {CURVE_GRID_YEARS}y grid")

    @property
    def maturities(self) -> np.ndarray:
        return np.array([lr.maturity for lr in self.liquid_rates], dtype=float)

    @property
    def rates(self) -> np.ndarray:
        return np.array([lr.rate for lr in self.liquid_rates], dtype=float)

    def to_dict(self) -> dict:
        return {
            "liquid_rates": [lr.to_dict() for lr in self.liquid_rates],
            "cra": self.cra,
            "llp": self.llp,
            "ufr": self.ufr,
            "convergence_maturity": self.convergence_maturity,
            "alpha": self.alpha,
            "alpha_min": self.alpha_min,
            "alpha_tolerance": self.alpha_tolerance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "YieldCurveSpec":
        rates = tuple(
            LiquidRate(maturity=float(r["maturity"]), rate=float(r["rate"]),
                       factor_id=r.get("factor"))
            for r in d["liquid_rates"]
        )
        return cls(
            liquid_rates=rates,
            cra=float(d.get("cra", 0.001)),
            llp=float(d.get("llp", 20.0)),
            ufr=float(d.get("ufr", 0.039)),
            convergence_maturity=float(d.get("convergence_maturity", 60.0)),
            alpha=d.get("alpha"),
            alpha_min=float(d.get("alpha_min", 0.05)),
            alpha_tolerance=float(d.get("alpha_tolerance", 1e-4)),
        )


def load_curve_spec(path: str | Path) -> YieldCurveSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return YieldCurveSpec.from_dict(json.load(fh))


# --------------------------------------------------------------------------
# Smith-Wilson machinery
# --------------------------------------------------------------------------


def _wilson_matrix(t: np.ndarray, u: np.ndarray, alpha: float, omega: float) -> np.ndarray:
    """Kernel W(t_i, u_j) for all pairs; t and u are 1-D arrays."""
    tt = t[:, None]
    uu = u[None, :]
    mn = np.minimum(tt, uu)
    mx = np.maximum(tt, uu)
    h = alpha * mn - np.exp(-alpha * mx) * np.sinh(alpha * mn)
    return np.exp(-omega * (tt + uu)) * h


def _fit_weights(u: np.ndarray, prices: np.ndarray, alpha: float, omega: float) -> np.ndarray:
    """Solve W zeta = prices - exp(-omega u). ``prices`` may be (J,) or (J, N)."""
    w = _wilson_matrix(u, u, alpha, omega)
    rhs = prices - (np.exp(-omega * u) if prices.ndim == 1 else np.exp(-omega * u)[:, None])
    try:
        return np.linalg.solve(w, rhs)
    except np.linalg.LinAlgError as exc:
        raise CurveFitError(f"singular Smith-Wilson system: {exc}") from exc


def _prices_at(
    t: np.ndarray, u: np.ndarray, zeta: np.ndarray, alpha: float, omega: float
) -> np.ndarray:
    """Zero-coupon prices P(t) for a fitted weight vector."""
    return np.exp(-omega * t) + _wilson_matrix(t, u, alpha, omega) @ zeta


def _forward_gap(u, prices, alpha, omega, t_conv, ufr) -> float:
    zeta = _fit_weights(u, prices, alpha, omega)
    p = _prices_at(np.array([t_conv, t_conv + 1.0]), u, zeta, alpha, omega)
    return abs(p[0] / p[1] - 1.0 - ufr)


def calibrate_alpha(spec: YieldCurveSpec) -> float:
    """Smallest alpha >= alpha_min meeting the forward convergence tolerance."""
    omega = np.log1p(spec.ufr)
    u = spec.maturities
    prices = (1.0 + spec.rates - spec.cra) ** (-u)
    t_conv = spec.convergence_maturity

    def gap(alpha: float) -> float:
        return _forward_gap(u, prices, alpha, omega, t_conv, spec.ufr)

    if gap(spec.alpha_min) <= spec.alpha_tolerance:
        return spec.alpha_min
    lo, hi = spec.alpha_min, spec.alpha_min
    while gap(hi) > spec.alpha_tolerance:
        lo, hi = hi, hi * 2.0
        if hi > 20.0:
            raise CurveFitError("alpha search failed: forward does not converge to the UFR")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if gap(mid) <= spec.alpha_tolerance:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-8:
            break
    return hi


@dataclass
class YieldCurve:
    """Extrapolated zero curve on an annual grid (1..121 years)."""

    maturities: np.ndarray          # 1, 2, ..., CURVE_GRID_YEARS
    zero_rates: np.ndarray          # annual compounding
    discount_factors: np.ndarray
    alpha: float
    ufr: float

    def discount_factor(self, t: float) -> float:
        """Discount factor at t, log-linear between annual grid points."""
        if t < 0:
            raise ValuationError(f"negative maturity {t}")
        if t == 0:
            return 1.0
        if t > self.maturities[-1]:
            raise ValuationError(f"maturity {t} beyond the {self.maturities[-1]:.0f}y grid")
        lo = int(np.floor(t))
        if lo == t:
            return float(self.discount_factors[lo - 1])
        log_lo = 0.0 if lo == 0 else np.log(self.discount_factors[lo - 1])
        log_hi = np.log(self.discount_factors[lo])
        return float(np.exp(log_lo + (t - lo) * (log_hi - log_lo)))

    def forward_rate_1y(self, t: float) -> float:
        """Annualized one-year forward rate over [t, t + 1]."""
        return self.discount_factor(t) / self.discount_factor(t + 1.0) - 1.0


def extrapolate_curve(spec: YieldCurveSpec, alpha: float | None = None) -> YieldCurve:
    """Fit the liquid rates exactly and extrapolate toward the UFR.

    ``alpha`` overrides the spec; when both are None it is calibrated
    via :func:`calibrate_alpha`.
    """
    if alpha is None:
        alpha = spec.alpha if spec.alpha is not None else calibrate_alpha(spec)
    omega = np.log1p(spec.ufr)
    u = spec.maturities
    prices = (1.0 + spec.rates - spec.cra) ** (-u)
    zeta = _fit_weights(u, prices, alpha, omega)
    grid = np.arange(1, CURVE_GRID_YEARS + 1, dtype=float)
    p = np.exp(-omega * grid) + _wilson_matrix(grid, u, alpha, omega) @ zeta
    if np.any(p <= 0.0):
        raise CurveFitError("extrapolated prices are not positive; check inputs")
    rates = p ** (-1.0 / grid) - 1.0
    return YieldCurve(
        maturities=grid, zero_rates=rates, discount_factors=p, alpha=alpha, ufr=spec.ufr
    )


def shifted_spec(spec: YieldCurveSpec, shifts: dict[str, float]) -> YieldCurveSpec:
    """Spec with each liquid rate moved by its factor's scenario shift.

    Liquid rates are shifted before re-extrapolation, so a rate scenario
    reshapes the whole extrapolated zone consistently.
    """
    rates = tuple(
        LiquidRate(
            maturity=lr.maturity,
            rate=lr.rate + shifts.get(lr.factor_id, 0.0) if lr.factor_id else lr.rate,
            factor_id=lr.factor_id,
        )
        for lr in spec.liquid_rates
    )
    return YieldCurveSpec(
        liquid_rates=rates,
        cra=spec.cra,
        llp=spec.llp,
        ufr=spec.ufr,
        convergence_maturity=spec.convergence_maturity,
        alpha=spec.alpha,
        alpha_min=spec.alpha_min,
        alpha_tolerance=spec.alpha_tolerance,
    )


def batch_discount_factors(
    spec: YieldCurveSpec,
    shifted_rates: np.ndarray,
    durations: np.ndarray,
    alpha: float,
) -> np.ndarray:
    """Discount factors for many rate scenarios at once.

    ``shifted_rates`` is (n_scenarios, n_liquid) of already-shifted
    liquid rates (CRA not yet deducted); returns (n_scenarios,
    n_durations). Non-integer durations interpolate log-linearly between
    annual grid points, matching :meth:`YieldCurve.discount_factor`.
    """
    omega = np.log1p(spec.ufr)
    u = spec.maturities
    shifted_rates = np.atleast_2d(np.asarray(shifted_rates, dtype=float))
    if shifted_rates.shape[1] != u.size:
        raise ValuationError(
            f"rate matrix has {shifted_rates.shape[1]} columns, spec has {u.size} liquid rates"
        )
    durations = np.asarray(durations, dtype=float)
    if np.any(durations <= 0) or np.any(durations > CURVE_GRID_YEARS):
        raise ValuationError("liability durations must lie in (0, grid] years")

    prices_liquid = (1.0 + shifted_rates - spec.cra) ** (-u)      # (N, J)
    zeta = _fit_weights(u, prices_liquid.T, alpha, omega)          # (J, N)

    lo = np.floor(durations).astype(int)
    grid_points = np.unique(np.concatenate([lo[lo >= 1], lo + 1]).astype(float))
    w_grid = _wilson_matrix(grid_points, u, alpha, omega)          # (G, J)
    p_grid = np.exp(-omega * grid_points)[:, None] + w_grid @ zeta  # (G, N)
    if np.any(p_grid <= 0.0):
        raise CurveFitError("extrapolated scenario prices are not positive")

    index = {g: i for i, g in enumerate(grid_points)}
    out = np.empty((shifted_rates.shape[0], durations.size))
    for j, (d, fl) in enumerate(zip(durations, lo)):
        if fl == d:
            out[:, j] = p_grid[index[float(fl)]]
            continue
        log_hi = np.log(p_grid[index[float(fl + 1)]])
        log_lo = 0.0 if fl == 0 else np.log(p_grid[index[float(fl)]])
        out[:, j] = np.exp(log_lo + (d - fl) * (log_hi - log_lo))
    return out
