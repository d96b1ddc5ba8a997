"""Exception hierarchy.

Configuration problems map to CLI exit code 2, numerical failures to 3.
"""


class PTMetaError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class ConfigurationError(PTMetaError, ValueError):
    """Invalid geometry, material or run configuration."""

    exit_code = 2


class NumericalError(PTMetaError, ArithmeticError):
    """Base class for numerical failures."""


class SingularityError(NumericalError):
    """Evaluation at a kernel singularity or a pole."""


class WoodAnomalyError(NumericalError):
    """k = |alpha + q| for some dual lattice vector q."""


class IllConditionedError(NumericalError):
    """Dense solve with condition number above the allowed bound."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ConvergenceError(NumericalError):
    """Iteration did not converge; carries the residual history."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class SymmetryError(NumericalError):
    """A symmetry that should hold by construction is violated."""


class UnsupportedRegimeError(NumericalError):
    """Parameters outside the regime a solver handles."""
