"""Exception hierarchy shared by every module."""


class InfluencePercolationError(Exception):
    """Base class for all package errors."""


class ParameterError(InfluencePercolationError, ValueError):
    """Invalid model or scenario parameters."""


class IngestionError(InfluencePercolationError, ValueError):
    """An edge list or label file could not be turned into a graph."""


class EstimationError(InfluencePercolationError, ValueError):
    """Block probabilities cannot be estimated from the given graph."""


class ValidationError(InfluencePercolationError, ValueError):
    """A vector that must be a probability vector is not one."""


class MutationError(InfluencePercolationError):
    """Attempt to change the preferences of a seeded voter."""


class PlacementError(InfluencePercolationError, ValueError):
    """Seeded voters cannot be placed as requested."""


class DegenerateModelError(InfluencePercolationError, ValueError):
    """The mean-field normaliser vanishes (all edge probabilities are zero)."""


class ConsistencyError(InfluencePercolationError, RuntimeError):
    """Maintained aggregates drifted away from their exact values."""


class UsageError(InfluencePercolationError):
    """Bad command-line or configuration input."""
