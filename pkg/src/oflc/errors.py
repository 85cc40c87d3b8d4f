"""Exception types shared across the package."""


class OflcError(Exception):
    """Base class for package errors."""


class DegenerateBError(OflcError):
    """The torque-channel direction b has (numerically) zero length.

    The torque channel is uncontrollable at such a state; the controller
    holds its previous voltage and flags the tick.
    """


class OrthogonalityViolation(OflcError):
    """The auxiliary input z is not orthogonal to b within tolerance."""


class NegativeDiscriminantError(OflcError):
    """Voltage budget for z came out negative; the torque command was not
    clamped to its feasible band first (programming error)."""


class NonFiniteStateError(OflcError):
    """Plant state left the finite range during integration."""


class PoorFitError(OflcError):
    """First-order step-response fit residual exceeds threshold."""


class ConfigError(OflcError):
    """Base class for scenario-configuration errors."""


class ParseError(ConfigError):
    """Config document is not well formed."""


class ValidationError(ConfigError):
    """Config parsed but violates a scenario invariant."""

    def __init__(self, field, reason):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")
