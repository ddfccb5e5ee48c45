"""Exception hierarchy shared across the package."""


class ZolqrError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(ZolqrError):
    """Operands have incompatible shapes."""


class NonSquareError(DimensionMismatchError):
    """A square matrix was required."""


class NumericalFailureError(ZolqrError):
    """An iterative kernel failed to converge or a solve broke down."""


class UnstableArgumentError(ZolqrError):
    """Lyapunov solve requested for a matrix with spectral radius >= 1."""


class NotStabilizableError(ZolqrError):
    """Riccati iteration diverged or produced an unstable closed loop."""


class UnstableGainError(ZolqrError):
    """An operation requiring a stabilizing gain received an unstable one."""


class DestabilizedQueryError(ZolqrError):
    """A cost query was issued at a gain outside the stabilizing set."""


class PerturbationRejectedError(DestabilizedQueryError):
    """Retryable destabilized query: the caller may redraw the perturbation.

    Raised instead of :class:`DestabilizedQueryError` when the divergence
    policy is ``resample``; estimators catch it and redraw.
    """


class DegenerateBaselineError(ZolqrError):
    """Normalized-gap denominator is numerically zero."""


class DegenerateSublevelError(ZolqrError):
    """Sublevel-set sampler accepted too small a fraction of proposals."""


class ParseError(ZolqrError):
    """A configuration or system file could not be parsed."""


class InvalidSystemError(ZolqrError):
    """A system definition violates a type invariant (names the offender)."""


class ConfigError(ZolqrError):
    """A run or experiment configuration is inconsistent."""
