"""Exception hierarchy shared across the package.

Two broad failure classes map onto the CLI exit codes: bad inputs
(exit 1) and numerical/algorithmic failures mid-pipeline (exit 2).
"""


class StvsError(Exception):
    """Base class for all package errors."""


class ValidationError(StvsError):
    """Input data, schema or configuration is invalid."""


class ComputationError(StvsError):
    """A pipeline stage failed on otherwise valid input."""


class TrivialRecovery(StvsError):
    """The residual never left the equilibrium: no dip to analyse.

    Callers treat the affected generator as trivially safe (index 0).
    """


class TriviallySafe(StvsError):
    """Residual stays above every protection cap: no trip possible."""


class TriviallyTripping(StvsError):
    """No admissible recovery reaches any protection cap: trip certain."""
