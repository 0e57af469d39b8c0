"""Exception types shared across the package."""


class ScopfError(Exception):
    """Base class for all package errors."""


class CaseParseError(ScopfError):
    """Raised when a case file cannot be parsed into a network."""


class NetworkValidationError(ScopfError):
    """Raised when an operation requires a valid network and gets one with errors."""


class SingularUpdateError(ScopfError):
    """Rank-one outage update hit a (near-)singular denominator.

    The caller should fall back to island handling or full refactorization.
    """


class IslandingError(ScopfError):
    """An outage split the network in a way the requested method cannot handle."""


class LPError(ScopfError):
    """Base class for linear-programming backend failures."""


class LPInfeasibleError(LPError):
    """The LP has no feasible point."""

    def __init__(self, message: str, diagnosis: dict | None = None):
        super().__init__(message)
        self.diagnosis = diagnosis or {}


class LPUnboundedError(LPError):
    """The LP objective is unbounded below."""


class ConvergenceError(ScopfError):
    """Iterative solve exceeded its iteration budget before passing verification."""
