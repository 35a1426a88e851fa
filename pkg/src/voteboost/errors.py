"""Exception taxonomy shared across the package."""


class VoteBoostError(Exception):
    """Base class for all package errors."""


class DomainError(VoteBoostError, ValueError):
    """A caller violated a documented precondition (bad shape, range, or value)."""


class DataError(VoteBoostError):
    """Input data could not be loaded or is unusable (CSV parsing, labels, splits)."""


class ConvergenceError(VoteBoostError):
    """An iterative procedure failed to make progress within its retry budget."""


class InternalError(VoteBoostError):
    """A postcondition the package guarantees was violated; indicates a bug."""
