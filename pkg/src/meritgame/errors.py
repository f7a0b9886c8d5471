"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A scenario or technology definition violates a model invariant."""


class InputError(ValueError):
    """A runtime argument is outside its documented domain."""


class ClearingError(RuntimeError):
    """Price clearing failed to reach the KKT tolerance.

    Carries the final residual so callers can report how close the
    solve got before giving up.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual
