"""Exception types raised across the package."""


class FkpfError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(FkpfError, ValueError):
    """An argument violates an operation's precondition."""


class InvalidStateError(FkpfError, RuntimeError):
    """An object is in a state the operation cannot accept (e.g. unnormalized weights)."""


class DegenerateWeightsError(FkpfError, ArithmeticError):
    """Every particle weight is zero, i.e. the total likelihood collapsed."""


class OutOfHypothesisError(InvalidArgumentError):
    """Bound requested outside the parameter range its derivation covers."""
