"""Exception hierarchy.

Three families matter for callers: :class:`DataError` (bad input data,
CLI exit code 3), :class:`EstimationError` (a fit could not be computed,
CLI exit code 4) and :class:`ConfigError` (bad configuration, exit code 2).
"""


class PanelDebiasError(Exception):
    """Base class for all package errors."""


class DataError(PanelDebiasError):
    """Input data violates a precondition."""


class EstimationError(PanelDebiasError):
    """An estimator or correction could not be computed."""


class ConfigError(PanelDebiasError):
    """Invalid configuration or invalid argument values."""


# -- panel construction ------------------------------------------------------

class UnbalancedPanel(DataError):
    """Some unit is missing a (period, variable) cell."""


class DuplicateCell(DataError):
    """The same (unit, period, variable) cell appears more than once."""


class NonNumericValue(DataError):
    """A cell value could not be interpreted as a finite real number."""


class UnknownVariable(DataError):
    """A referenced variable does not exist in the panel."""


class LagTooLarge(DataError):
    """Lag order is not smaller than the number of periods."""


class SingletonTimeSeries(DataError):
    """Differencing requires at least two periods."""


class TooFewPeriods(DataError):
    """Not enough periods to build the requested design."""


class TooFewPeriodsForSplit(DataError):
    """Each half of a time split must support estimation."""


class TooFewUnits(DataError):
    """Not enough cross-sectional units for the requested operation."""


class InvalidPermutation(DataError):
    """Unit ordering is not a permutation of the sample's units."""


# -- estimation --------------------------------------------------------------

class RankDeficientDesign(EstimationError):
    """Design matrix loses full column rank after partialling out dummies."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class SingleCluster(EstimationError):
    """Cluster-robust covariance needs at least two clusters."""


class SingularBread(EstimationError):
    """Gram matrix of partialled-out regressors is singular."""


class SingularH(EstimationError):
    """Bias-correction normalisation matrix is singular."""


class InvalidTrim(ConfigError):
    """Trimming parameter outside 1 <= M < effective T."""


class NoValidInstruments(EstimationError):
    """No admissible instrument columns could be constructed."""


class ZeroWeightMatrix(EstimationError):
    """Instrument outer-product sum is identically zero."""


class OrderConditionFailed(EstimationError):
    """Fewer moment conditions than coefficients (m < p)."""


class SingularGMMGram(EstimationError):
    """GMM cross-product matrix X'Z W Z'X is singular."""


class HalfSampleOrderConditionFailed(EstimationError):
    """A half-sample lost identification during split debiasing."""


class UnitRootDenominator(EstimationError):
    """Lag coefficients sum to one; long-run effect undefined."""


class NegativeVariance(EstimationError):
    """Quadratic form produced a negative variance."""


class TooManyFailedReplicates(EstimationError):
    """More than 10% of bootstrap replicates failed to estimate."""


class InvalidConfig(ConfigError):
    """Simulation configuration violates an invariant."""
