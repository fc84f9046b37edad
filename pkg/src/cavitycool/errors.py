"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


class ResourceLimitError(RuntimeError):
    """Requested problem size exceeds a configured limit."""


class NumericalError(RuntimeError):
    """A numerical method failed to converge or exceeded its work budget.

    ``diagnostics`` carries whatever the failing routine knew at the time.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class FitWindowError(NumericalError):
    """Trajectory does not rise far enough to fit a time constant."""


class SweepError(NumericalError):
    """A sweep point failed; ``partial`` holds the points finished before it."""

    def __init__(self, message, partial=None, diagnostics=None):
        super().__init__(message, diagnostics)
        self.partial = list(partial or [])
