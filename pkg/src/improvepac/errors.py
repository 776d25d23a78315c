class ImprovePacError(Exception):
    """Base class for library errors."""


class DomainError(ImprovePacError, ValueError):
    """An instance, concept, or distribution does not belong to the expected space."""


class ParameterError(ImprovePacError, ValueError):
    pass


class CapabilityError(ImprovePacError):
    """The request is valid but beyond what the exhaustive/closed-form backends support."""


class RealizabilityError(ImprovePacError):
    pass


class PropertyViolationError(ImprovePacError):
    """A concept class lacks a structural property an algorithm relies on."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ProtocolError(ImprovePacError):
    pass


class AdversaryError(ImprovePacError):
    pass


class InvariantError(ImprovePacError, AssertionError):
    """A runtime check of a guaranteed property failed."""


class FixtureError(ImprovePacError):
    """A bundled or user-supplied fixture file is missing or malformed."""


class ConfigError(ImprovePacError, ValueError):
    """An experiment configuration does not match the verb's schema."""
