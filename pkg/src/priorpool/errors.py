"""Exception types shared across the package."""


class PriorPoolError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PriorPoolError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ValidationError(PriorPoolError, ValueError):
    """Structured input failed validation.

    ``code`` is a short machine-readable tag, ``details`` an optional list
    of per-item messages (CSV loading aggregates one entry per bad row).
    """

    def __init__(self, message, *, code="validation", details=None):
        super().__init__(message)
        self.code = code
        self.details = list(details) if details else []


class ConfigurationError(PriorPoolError):
    """A requested configuration is unusable, e.g. no admissible family."""


class FittingError(PriorPoolError):
    """The optimizer did not converge. Carries the best iterate found."""

    def __init__(self, message, *, family, best_params, best_sse):
        super().__init__(message)
        self.family = family
        self.best_params = best_params
        self.best_sse = best_sse


class IntegrationError(PriorPoolError):
    """Adaptive quadrature failed to meet tolerance within its budget."""

    def __init__(self, message, *, estimate, error_bound):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class EmptyPoolError(PriorPoolError):
    """A log-linear pool has (numerically) no probability mass."""


class NoCalibratedExpertError(PriorPoolError):
    """Every expert fell below the calibration cutoff."""


class CoverageError(PriorPoolError):
    """An evaluand or expert is missing required per-question entries."""


class UndefinedCorrelationError(PriorPoolError):
    """A correlation is undefined because an error vector has zero variance."""

    def __init__(self, message, *, ids=()):
        super().__init__(message)
        self.ids = tuple(ids)


class UndefinedSensitivityError(DomainError):
    """A sensitivity denominator is zero."""


class VersionConflictError(PriorPoolError):
    """Optimistic concurrency failure: the stored version moved on."""

    def __init__(self, message, *, expected=None, actual=None):
        super().__init__(message)
        self.expected = expected
        self.actual = actual


class NotFoundError(PriorPoolError, KeyError):
    """A referenced document id does not exist in the store."""
