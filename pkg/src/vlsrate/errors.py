"""Exception hierarchy shared by every module.

The CLI maps :class:`InvalidInputError` to exit code 1 and
:class:`NumericalError` to exit code 2.
"""


class VlsError(Exception):
    pass


class InvalidInputError(VlsError, ValueError):
    pass


class UnknownFamilyError(InvalidInputError):
    pass


class DimensionError(InvalidInputError):
    """``n`` does not fit the lattice convention of a grid family."""


class DisconnectedGraphError(InvalidInputError):
    pass


class NumericalError(VlsError, RuntimeError):
    pass


class NotReversibleError(NumericalError):
    pass


class NoConvergenceError(NumericalError):
    pass


class InsufficientTailError(NumericalError):
    """Too few error samples above the floor to fit a tail rate."""
