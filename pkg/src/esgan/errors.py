"""Exception hierarchy shared across the engine.

Every error carries a process exit code used by the command line
interface: 1 config, 2 data, 3 training, 4 valuation / risk metrics.
"""


class EsganError(Exception):
    """Base class for all engine errors."""

    exit_code = 1


class ConfigError(EsganError):
    """Bad or inconsistent run configuration."""

    exit_code = 1


# --- data ingestion -------------------------------------------------------


class DataError(EsganError):
    exit_code = 2


class UnknownFactor(DataError):
    """CSV header and factor schema disagree."""


class DuplicateDate(DataError):
    """The same observation date appears twice."""


class NonMonotoneDates(DataError):
    """Observation dates are not strictly increasing."""


class UnparseableCell(DataError):
    """A CSV cell could not be parsed as a date or number."""


class LeadingGap(DataError):
    """A factor column starts with a missing value, so forward filling
    has nothing to carry."""


class MissingValues(DataError):
    """An operation that needs complete data received missing cells."""


class WindowTooLarge(DataError):
    """Return window is at least as long as the series."""


class NonPositiveLevel(DataError):
    """Relative returns need strictly positive levels."""


class DegenerateFactor(DataError):
    """Zero-variance factor column cannot be normalized."""


class InsufficientHistory(DataError):
    """Backtest evaluation date lacks a full look-back window."""


# --- GAN training ---------------------------------------------------------


class TrainingError(EsganError):
    exit_code = 3


class TrainingDiverged(TrainingError):
    """Network parameters or losses became non-finite.

    Carries the last good checkpoint so callers can salvage it.
    """

    def __init__(self, message, iteration=None, last_good=None):
        super().__init__(message)
        self.iteration = iteration
        self.last_good = last_good


class UntrainedModel(TrainingError):
    """Generation was requested from a model that never trained."""


# --- valuation and risk metrics -------------------------------------------


class ValuationError(EsganError):
    exit_code = 4


class DegenerateYield(ValuationError):
    """Total yield at or below -100%; discounting undefined."""


class UnknownRating(ValuationError):
    """Rating missing from the migration matrix."""


class UnresolvedFactor(ValuationError):
    """Instrument references a factor absent from the scenario set."""


class UnknownInstrument(ValuationError):
    """Portfolio holding references an instrument not in the universe."""


class CurveFitError(ValuationError):
    """Yield-curve fit system is singular or alpha search failed."""


class ZeroBaseValue(ValuationError):
    """Risk charge undefined for a portfolio with zero base value."""


class UndefinedCQV(ValuationError):
    """Quartile variation coefficient has a zero denominator."""
