"""Exception hierarchy shared by all gaugedyn modules."""


class GaugeDynError(Exception):
    """Base class for library errors."""


class DomainError(GaugeDynError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConvergenceError(GaugeDynError, ArithmeticError):
    """An iterative method failed to reach its tolerance."""


class TooCoarse(DomainError):
    """The packing scale is too large relative to the host square."""


class DegenerateInput(DomainError):
    """Sample data carries no usable information (e.g. coincident points)."""


class BudgetError(GaugeDynError):
    """A computation would exceed its configured size budget."""


class DepthOverflow(BudgetError):
    """Forward iterates leave the range representable in double precision."""


class EmptyPacking(GaugeDynError):
    """A packing step produced no boxes."""
