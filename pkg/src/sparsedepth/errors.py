"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An operation received a value outside its documented domain."""


class MeshParseError(ValueError):
    """An OBJ file could not be parsed; the message names the offending line."""


class FitError(RuntimeError):
    """A least-squares fit is underdetermined or degenerate."""


class ConfigError(ValueError):
    """A run-config document is malformed or violates an invariant."""
