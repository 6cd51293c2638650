"""Exception hierarchy.

Input problems (bad shapes, out-of-range sizes, malformed configs) derive
from :class:`InputError`; failures of the numerics themselves (SVD
non-convergence, non-positive-definite covariances) derive from
:class:`NumericalError`. The CLI maps the first family to exit code 2 and
the second to exit code 3.
"""


class JointDRError(Exception):
    """Base class for all errors raised by this package."""


class InputError(JointDRError, ValueError):
    """Invalid argument values or shapes."""


class DimensionError(InputError):
    """Arrays whose dimensions do not agree.

    ``dimension`` names the offending axis (e.g. ``"m"`` or ``"n1"``).
    """

    def __init__(self, message, dimension=None):
        super().__init__(message)
        self.dimension = dimension


class EmptyInputError(InputError):
    """A sample set or vector with no entries."""


class ConfigError(InputError):
    """Malformed experiment configuration."""


class NotOrthonormalError(InputError):
    """A basis whose columns are not orthonormal to the required tolerance."""

    def __init__(self, message, deviation):
        super().__init__(message)
        self.deviation = deviation


class NumericalError(JointDRError, ArithmeticError):
    """A numerical routine failed on valid-looking input."""


class NotPositiveDefiniteError(NumericalError):
    """Cholesky factorization broke down; ``pivot`` is the 0-based failing index."""

    def __init__(self, message, pivot):
        super().__init__(message)
        self.pivot = pivot


class SingularCovarianceError(NotPositiveDefiniteError):
    """A sample covariance that cannot be used for whitening."""
