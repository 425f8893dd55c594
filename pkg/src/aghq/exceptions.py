"""Exception types shared across the package."""


class EvaluationError(RuntimeError):
    """A user callback returned a non-finite value where a finite one is required."""


class GridTooLargeError(ValueError):
    """A requested product grid exceeds the configured node cap."""


class NonPositiveDefiniteError(ValueError):
    """A matrix that must be positive definite failed its Cholesky factorization."""


class InnerOptimizationError(RuntimeError):
    """The latent-variable optimization failed at a fixed hyperparameter value."""


class InvalidTransformationError(ValueError):
    """A parameter transformation is inconsistent or not monotone on the grid."""
