"""Exception types raised across the package."""


class FracWishartError(Exception):
    """Base class for all package errors."""


class DomainError(FracWishartError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class PreconditionError(FracWishartError, ValueError):
    """An input violates a smoothness or ordering precondition (e.g. tied eigenvalues)."""


class UsageError(FracWishartError, ValueError):
    """An operation was called with an unsupported combination of options."""


class ConfigurationError(UsageError):
    """A simulation configuration is invalid or exceeds resource limits."""


class CirculantEmbeddingError(FracWishartError, RuntimeError):
    """The circulant embedding has significantly negative eigenvalues.

    Callers should fall back to the Cholesky sampler.
    """

    fallback = "cholesky"


class NumericalError(FracWishartError, RuntimeError):
    """An iterative or quadrature routine failed to reach its tolerance."""


class SummaryFormatError(FracWishartError, ValueError):
    """A persisted summary could not be parsed."""

    def __init__(self, path, message, line=None, field=None):
        self.path = str(path)
        self.line = line
        self.field = field
        where = self.path
        if line is not None:
            where += f":{line}"
        if field is not None:
            where += f" [{field}]"
        super().__init__(f"{where}: {message}")
