"""Exception hierarchy shared by all modules."""


class HTypeError(Exception):
    """Base class for library errors."""


class StructureError(HTypeError, ValueError):
    """Malformed input: wrong shapes, asymmetric matrices, unknown names."""


class DomainError(HTypeError, ValueError):
    """Argument outside the domain of an operation (e.g. non-positive dilation)."""


class SingularityError(HTypeError, ArithmeticError):
    """Evaluation at a point where the quantity is singular (typically the origin)."""


class NumericalConsistencyError(HTypeError, RuntimeError):
    """Two independent estimators of the same quantity disagree."""


class PreconditionError(HTypeError, RuntimeError):
    """A mathematical precondition of a pipeline is not met."""


class SolverError(HTypeError, RuntimeError):
    """An iterative linear solve did not converge."""

    def __init__(self, message, residual_trace=()):
        super().__init__(message)
        self.residual_trace = list(residual_trace)
