"""Exception types shared across the toolkit."""


class EnsembleControlError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(EnsembleControlError):
    """A scalar parameter or configuration value is out of its valid range."""


class ShapeError(EnsembleControlError):
    """Array dimensions do not match the declared system dimensions."""


class IntegrationError(EnsembleControlError):
    """Coefficient evaluation or time stepping failed during integration.

    Carries the time and parameter value at which the failure occurred.
    """

    def __init__(self, message, t=None, s=None):
        super().__init__(message)
        self.t = t
        self.s = s


class ToleranceNotMetError(EnsembleControlError):
    """Step refinement hit its ceiling before reaching the requested tolerance."""


class NumericalError(EnsembleControlError):
    """A dense linear-algebra kernel (eigensolver, SVD) failed or produced
    unusable output."""
