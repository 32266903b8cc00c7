"""Exception hierarchy shared by all kplab modules."""


class KplabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(KplabError):
    """Grid, parameter or datum configuration is unrepresentable."""


class DomainError(KplabError):
    """An operation was evaluated at a pole or outside its domain."""


class PreconditionError(KplabError):
    """A call violates a documented hypothesis of the operation."""


class AccuracyError(KplabError):
    """A quadrature cannot meet its tolerance at the sampled density."""


class BlowupError(KplabError):
    """Time stepper rejected a step (NaN or norm explosion)."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class DivergenceError(KplabError):
    """Fixed-point iteration shows sustained non-contractive ratios."""


class ScatteringNotDetected(KplabError):
    """Cauchy gaps of the pullback do not decrease; no asymptotic state."""
