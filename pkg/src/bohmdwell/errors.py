"""Exception hierarchy; each class carries the CLI exit code it maps to."""


class BohmDwellError(Exception):
    exit_code = 1


class ConfigError(BohmDwellError, ValueError):
    exit_code = 2


class NumericGuardError(BohmDwellError, RuntimeError):
    """A numerical guard tripped (domain escape, singular velocity, solver failure)."""

    exit_code = 3


class AsymptoticsError(BohmDwellError, RuntimeError):
    """Scattering has not concluded within the recorded window."""

    exit_code = 4


class InvariantError(BohmDwellError, AssertionError):
    exit_code = 5
