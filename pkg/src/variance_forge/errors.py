"""Error taxonomy shared across the package.

The CLI maps these onto exit codes: configuration errors exit 2, data and
shape errors exit 3, anything else that escapes exits 4.
"""


class VarianceForgeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(VarianceForgeError):
    """A configuration value is missing, malformed, or out of range."""


class DataError(VarianceForgeError):
    """A dataset violates its contract (bad file, bad labels, bad split)."""


class ShapeError(VarianceForgeError):
    """Array dimensions do not line up with the declared architecture."""


class DivergenceError(VarianceForgeError):
    """Training produced a non-finite loss; carries the offending epoch."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")


class BudgetExhausted(VarianceForgeError):
    """Internal signal: a search hit its evaluation budget mid-step."""
