class DepasError(Exception):
    """Base class for every error raised by this package."""


class DomainError(DepasError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class UsageError(DepasError, ValueError):
    """A search primitive or command was called with unusable parameters."""


class InfeasibleError(DepasError):
    """No parameter value in the searched range satisfies the constraint.

    ``detail`` carries whatever diagnostic value explains the failure
    (for example the feasibility value g(n0) of a Min-delta request).
    """

    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail


class TraceError(DepasError, ValueError):
    """A workload trace is malformed."""
