"""Exception types shared across the package."""


class VaporNoiseError(Exception):
    """Base class for all package-specific errors."""


class ScenarioError(VaporNoiseError):
    """Scenario file could not be loaded or failed validation."""


class UnitError(ScenarioError):
    """A physical quantity carried a missing, unknown, or mismatched unit."""


class SingularSteadyStateError(VaporNoiseError):
    """The steady-state linear system is singular or too ill-conditioned.

    Carries the estimated condition number of the offending system.
    """

    def __init__(self, condition_number: float, message: str | None = None):
        self.condition_number = condition_number
        super().__init__(
            message
            or f"steady-state system ill-conditioned (cond ~ {condition_number:.3e})"
        )


class QuadratureConvergenceError(VaporNoiseError):
    """Velocity-average did not stabilise within the evaluation budget.

    ``last`` and ``previous`` hold the final two moment estimates so the
    caller can judge how far apart they still are.
    """

    def __init__(self, message: str, last=None, previous=None):
        self.last = last
        self.previous = previous
        super().__init__(message)


class FlatSlopeError(VaporNoiseError):
    """The mean-signal derivative is indistinguishable from quadrature noise.

    Slope detection is unusable at such an operating point.
    """


class BracketingError(VaporNoiseError):
    """A root-finding bracket does not straddle a sign change."""

    def __init__(self, lo: float, hi: float, f_lo: float, f_hi: float):
        self.lo = lo
        self.hi = hi
        self.f_lo = f_lo
        self.f_hi = f_hi
        super().__init__(
            f"no sign change on bracket [{lo:g}, {hi:g}]: f(lo)={f_lo:g}, f(hi)={f_hi:g}"
        )


class EmptyVolumeError(VaporNoiseError):
    """A susceptibility sample was requested for zero atoms in the volume."""


class DimOperatingPointError(VaporNoiseError):
    """Zero-photon draws exceeded the resample cap; the readout is too dim."""


class ValidationFailedError(VaporNoiseError):
    """A Monte Carlo validation run did not meet its tolerance."""
