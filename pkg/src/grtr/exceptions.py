"""Package-level exception types."""


class GrtrError(Exception):
    """Base class for errors raised by this package."""


class DataError(GrtrError):
    """Input files or datasets that cannot be used (missing, malformed, too short)."""


class DivergenceError(GrtrError):
    """Training produced a non-finite error; the step size is too large."""
