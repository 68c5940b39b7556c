"""Exception hierarchy.

Two families matter for the CLI: validation errors (bad shapes, bad
configuration; exit code 2) and numerical errors (breakdowns during a
computation; exit code 3).
"""


class SgcError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SgcError, ValueError):
    """Invalid argument, dimension, or configuration."""


class DimensionError(ValidationError):
    """Operand shapes do not agree."""


class RankError(ValidationError):
    """Requested rank outside [1, min(rows, cols)]."""


class SparsityError(ValidationError):
    """Sparsity level outside [1, d]."""


class ChunkingError(ValidationError):
    """Chunk count does not divide the vector length, or per-chunk sparsity out of range."""


class GradientError(ValidationError):
    """Gradient contains NaN or Inf entries."""


class SpecError(ValidationError):
    """Method spec is missing fields required by the chosen method."""


class NumericalError(SgcError, RuntimeError):
    """Breakdown inside a numerical routine."""


class ConvergenceError(NumericalError):
    """Iteration limit reached before the convergence criterion was met."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class DegenerateMatrixError(NumericalError):
    """No usable column available for greedy selection (zero norms)."""


class DegenerateSupportError(NumericalError):
    """Least-squares system on the selected columns is rank deficient."""


class CholeskyBreakdownError(NumericalError):
    """Non-positive pivot while extending the Cholesky factor."""

    def __init__(self, iteration, pivot):
        super().__init__(
            f"non-positive pivot {pivot:.3e} at iteration {iteration}"
        )
        self.iteration = iteration
        self.pivot = pivot


class TrainStepError(NumericalError):
    """An optimizer step failed during training; carries the step index."""

    def __init__(self, step, cause):
        super().__init__(f"step {step}: {cause}")
        self.step = step
        self.cause = cause
