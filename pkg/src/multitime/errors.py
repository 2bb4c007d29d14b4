"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` so the CLI can report
failures without parsing messages.
"""


class MultitimeError(Exception):
    code = "multitime.error"


class DegenerateIntervalError(MultitimeError, ValueError):
    """A propagator was requested over a zero-length time interval."""

    code = "kernel.degenerate_interval"


class NonFiniteError(MultitimeError, ValueError):
    code = "numeric.non_finite"


class PrefactorZeroError(MultitimeError, ValueError):
    """The mixed endpoint derivative of the classical action vanished."""

    code = "kernel.prefactor_zero"


class ConvergenceError(MultitimeError, RuntimeError):
    """Regularized quadrature failed to extrapolate to the unregularized limit.

    ``diagnostics`` holds the ladder, the per-rung values and the spread
    estimate so callers can see why.
    """

    code = "quadrature.no_convergence"

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class WindowTooSmallError(MultitimeError, ValueError):
    code = "quadrature.window_too_small"


class GridMismatchError(MultitimeError, ValueError):
    code = "grid.mismatch"


class GridError(MultitimeError, ValueError):
    code = "grid.invalid"


class NormalizationDriftError(MultitimeError, RuntimeError):
    code = "evolution.norm_drift"


class PathError(MultitimeError, ValueError):
    """Malformed path, mismatched endpoints, or a non-loop where a loop is needed."""

    code = "path.invalid"


class NotALoopError(PathError):
    code = "path.not_a_loop"


class HermiticityError(MultitimeError, ValueError):
    code = "operator.not_hermitian"


class DimensionMismatchError(MultitimeError, ValueError):
    code = "operator.dimension_mismatch"


class LogBranchError(MultitimeError, ValueError):
    """Holonomy eigenvalue sits on the branch cut of the principal logarithm."""

    code = "operator.log_branch"


class ExpressionError(MultitimeError, ValueError):
    code = "expression.invalid"
