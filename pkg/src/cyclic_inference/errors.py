"""Exception types raised across the package."""


class CyclicInferenceError(Exception):
    """Base class for every error this package raises on purpose."""


class NonHermitianError(CyclicInferenceError, ValueError):
    """A matrix that must be Hermitian (or symmetric) is not."""


class StateError(CyclicInferenceError, ValueError):
    """A state object violates its invariants (trace, positivity, shape)."""


class FactorError(CyclicInferenceError, ValueError):
    """A factor chain/cycle is malformed: negative entries, shape mismatch."""


class ConfigurationOverflowError(CyclicInferenceError, ValueError):
    """Joint enumeration would exceed the configuration cap."""


class ZeroPartitionError(CyclicInferenceError, ArithmeticError):
    """A partition function or marginal that must be positive is zero."""


class UnresolvedGaussianError(CyclicInferenceError, ValueError):
    """Kernel width sqrt(hbar*eps/m) is too narrow for the grid spacing."""


class PhaseBoundError(CyclicInferenceError, ValueError):
    """Dimensionless gauge phase z exceeds the validity bound of the
    real-kernel splitting."""


class IllConditionedFactorError(CyclicInferenceError, ValueError):
    """A factor inverse was requested but the factor is (near) singular."""


class SupportError(CyclicInferenceError, ValueError):
    """An operation hit a zero-probability state outside the tracked
    support (zero marginal, empty clamp, ...)."""


class QuadratureWindowError(CyclicInferenceError, ValueError):
    """Numerical quadrature window does not capture the required mass."""
