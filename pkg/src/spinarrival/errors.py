"""Exception types raised across the package."""


class SpinArrivalError(Exception):
    """Base class for all package errors."""


class NonNormalizable(SpinArrivalError, ValueError):
    pass


class DomainTooSmall(SpinArrivalError, RuntimeError):
    """Probability reached the artificial far wall of the longitudinal grid."""


class NodeSingularity(SpinArrivalError, ArithmeticError):
    """Density at a query point fell below the node floor."""


class StepLimit(SpinArrivalError, RuntimeError):
    pass


class TooManyAborts(SpinArrivalError, RuntimeError):
    pass


class BinningMismatch(SpinArrivalError, ValueError):
    pass


class DegenerateDesign(SpinArrivalError, ValueError):
    pass


class MissingDirection(SpinArrivalError, KeyError):
    pass


class NonUnitary(SpinArrivalError, ValueError):
    pass


class NotDecoupled(SpinArrivalError, ValueError):
    pass


class InvalidPOVM(SpinArrivalError, ValueError):
    """Positivity or normalization of a binned spin POVM is violated."""
