"""Exception types shared across the package."""


class FracdimError(Exception):
    """Base class for all package-specific errors."""


class DomainError(FracdimError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class PreconditionError(FracdimError, ValueError):
    """A documented precondition of an operation is violated."""


class ResourceLimitError(FracdimError, RuntimeError):
    """A configured cap (cell count, node count, orbit size) was exceeded."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NotFinitelyResolvable(FracdimError, RuntimeError):
    """The preimage orbit of the requested intervals does not close into a
    finite family, so no exact linear system can be built."""


class ConvergenceError(FracdimError, RuntimeError):
    """An iterative scheme failed to reach its residual tolerance."""


class CertificationError(FracdimError, RuntimeError):
    """A bound could not be certified under the requested rounding regime."""
