"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: input problems exit 2, solver
problems exit 3 and failed verifications exit 4.
"""


class RoutingError(Exception):
    """Base class for every error raised by this package."""


class NetworkInputError(RoutingError, ValueError):
    """The network document is malformed or violates a model invariant."""


class DomainError(RoutingError, ValueError):
    """A numeric argument is outside the domain of the function."""


class PathOverflowError(RoutingError):
    """An O/D pair has more simple paths than the enumeration limit."""


class HeterogeneityError(RoutingError):
    """Capacity asymmetry m/M differs between links."""


class UnsupportedExponentError(RoutingError):
    """The operation only supports linear (beta = 1) delays."""


class SupportLimitError(RoutingError):
    """Too many path-support patterns to enumerate."""


class LPFailure(RoutingError):
    """The LP backend failed for a reason other than infeasibility."""

    def __init__(self, message, support=None):
        super().__init__(message)
        self.support = support


class InfeasibleFlowError(RoutingError):
    """A flow vector violates class conservation or nonnegativity.

    ``residuals`` maps a constraint label to its signed residual.
    """

    def __init__(self, message, residuals):
        super().__init__(message)
        self.residuals = dict(residuals)
