"""Exception types. Each maps to a CLI exit code."""


class ConfigError(ValueError):
    """Invalid scenario configuration (exit code 2)."""

    exit_code = 2


class InputDataError(ValueError):
    """Unusable input data: empty coverage, degenerate geometry, ... (exit code 3)."""

    exit_code = 3


class ExternalServiceError(RuntimeError):
    """Routing or weather service failed beyond what fallbacks absorb (exit code 4)."""

    exit_code = 4
