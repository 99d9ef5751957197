"""Exception types raised across the package."""


class CavresError(Exception):
    """Base class for numerical failures (CLI exit status 3)."""


class TruncationLoss(CavresError):
    """A state or operator loses norm beyond tolerance in the truncated Fock space."""


class DimensionMismatch(CavresError, ValueError):
    pass


class IntegrationFailure(CavresError):
    """Step refinement could not reach the requested tolerance."""


class TrappingState(CavresError):
    """The pointer-state recurrence hits a decoupled Fock level.

    ``level`` is the index m with sin(theta_m / 2) = 0; the trapped state is |m - 1>.
    """

    def __init__(self, level, message=None):
        self.level = level
        super().__init__(message or f"trapping condition at Fock level {level}")


class NotConverged(CavresError):
    pass


class NoBracket(CavresError):
    pass


class DivergentNormalization(CavresError):
    pass


class TimingConstraintViolated(CavresError, ValueError):
    pass


class ConfigError(Exception):
    """Invalid scenario configuration (CLI exit status 2)."""

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(message if key is None else f"{key}: {message}")
