"""Exception types shared across the package."""


class NotPositiveDefiniteError(ValueError):
    """A covariance matrix failed its Cholesky-based positive-definiteness check."""


class ConvergenceError(RuntimeError):
    """An iterative routine (Newton, Richardson, GLM fit) failed to converge."""


class WeightCollapseError(RuntimeError):
    """All particle weights underflowed to zero at some time step."""
