"""
Exception hierarchy for the ISA solver package.

Usage errors derive from ValueError so callers that only know the standard
library still catch them; numerical breakdowns derive from ArithmeticError.
"""


class IsaError(Exception):
    """Base class for all isa_solver errors"""


class UsageError(IsaError, ValueError):
    """A precondition of a public operation was violated by the caller"""


class ConfigError(UsageError):
    """Run configuration could not be parsed or resolved"""


class DegenerateInstanceError(IsaError, ValueError):
    """Constraint matrix is rank deficient (AAᵀ not positive definite)"""


class DegenerateSupportError(DegenerateInstanceError):
    """Support submatrix of a planted solution is rank deficient"""


class NumericalBreakdownError(IsaError, ArithmeticError):
    """
    Non-finite value or loss of positive definiteness during an iteration.

    Args:
        message: human readable description
        last_iterate: last finite iterate before the failure (may be None)
        certificate: partial projection certificate, if the failure happened
            inside a projection
    """
    def __init__(self, message, last_iterate=None, certificate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.certificate = certificate
