"""Exception types raised by the solvers and estimators."""


class EntopError(Exception):
    """Base class for all package-specific errors."""


class InvalidEpsilonError(EntopError, ValueError):
    """Raised when a regularization strength is not a positive finite number."""


class DimensionMismatchError(EntopError, ValueError):
    """Raised when point sets, costs, or vectors have incompatible shapes."""


class AllocationRefusedError(EntopError, MemoryError):
    """Raised instead of materializing a dense matrix above the size threshold."""

    def __init__(self, n_rows: int, n_cols: int, threshold: int):
        self.n_rows = n_rows
        self.n_cols = n_cols
        self.threshold = threshold
        super().__init__(
            f"refusing to materialize a {n_rows} x {n_cols} dense matrix "
            f"(threshold {threshold}); use lazy evaluation"
        )


class NonConvergenceError(EntopError, RuntimeError):
    """Raised when the fixed-point iteration does not reach tolerance.

    Attributes
    ----------
    iterations : int
        Number of iterations performed before giving up.
    residual : float
        Marginal residual achieved at the last iterate.
    """

    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(marginal residual {residual:.3e})"
        )


class EigensolverError(EntopError, RuntimeError):
    """Raised when the iterative eigensolver fails or residuals exceed bounds."""

    def __init__(self, message: str, residuals=None):
        self.residuals = residuals
        super().__init__(message)


class SmallEigenvalueError(EntopError, ValueError):
    """Raised when dividing by an eigenvalue whose modulus is below the floor."""

    def __init__(self, value: complex, floor: float):
        self.value = value
        self.floor = floor
        super().__init__(
            f"eigenvalue {value} has modulus below the floor {floor}; "
            "the out-of-sample extension would be numerically meaningless"
        )


class EmptyDataError(EntopError, ValueError):
    """Raised when an operation receives no samples."""


class ConfigError(EntopError, ValueError):
    """Raised for malformed experiment configuration documents."""
