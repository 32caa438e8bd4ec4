"""GAN-based economic scenario generation and market-risk calculation.

The package covers the full internal-model chain for market risk: data
preparation from raw factor levels, adversarial training of a scenario
generator, distribution-quality validation, instrument valuation under
the generated one-year shifts, and portfolio risk metrics (99.5% VaR
risk charges, factor shocks, backtesting, dependency and stability
diagnostics).
"""

from .data import (
    DEFAULT_WINDOW,
    FactorSpec,
    ReturnKind,
    ReturnMatrix,
    Scaling,
    ScenarioSet,
    TimeSeriesSet,
    compute_rolling_returns,
    denormalize,
    fill_gaps,
    load_factor_schema,
    load_time_series,
    normalize,
)
from .errors import EsganError
from .gan import (
    AdamParams,
    GanConfig,
    GanModel,
    generate_scenarios,
    load_model,
    save_model,
    train_gan,
)
from .curve import LiquidRate, YieldCurve, YieldCurveSpec, extrapolate_curve
from .portfolio import (
    Holding,
    Portfolio,
    cqv,
    empirical_quantile,
    factor_shock,
    implied_percentile,
    joint_quantile_exceedance,
    risk_charge,
    stability_study,
    worst_case_backtest,
)
from .validation import (
    architecture_search,
    evaluate_checkpoint,
    novelty_distances,
    target_function,
    wasserstein_1d,
)
from .valuation import (
    Instrument,
    InstrumentKind,
    MigrationMatrix,
    discount_liability,
    instrument_value,
    migration_adjustment,
    scale_market_value,
    zero_coupon_value,
)

__version__ = "0.1.0"
