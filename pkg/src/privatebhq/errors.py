"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument violates a documented precondition."""


class DomainError(ParameterError):
    """Data does not belong to the domain an operation requires."""


class EmptyCandidatesError(ParameterError):
    """Every entry handed to a noisy-min selection has been removed."""


class NumericalError(RuntimeError):
    """An iterative numerical routine failed to converge."""


class CalibrationError(ParameterError):
    """A privacy budget does not match the sensitivity it is applied to."""
