class HammerPufError(Exception):
    """Base class for all package errors."""


class ConfigurationError(HammerPufError, ValueError):
    """Invalid geometry, parameters, or query configuration."""


class UsageError(HammerPufError):
    """Inputs that cannot be combined, e.g. helper data for another config."""


class FormatError(HammerPufError, ValueError):
    """Unreadable file or unsupported ``format_version``."""


class ReconstructionFailure(HammerPufError):
    """The reconstructed key does not match the enrolled key commitment."""
