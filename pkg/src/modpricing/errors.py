"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration, scenario file, or input data."""


class NonConvergenceError(RuntimeError):
    """Pricing iteration did not converge; carries the last iterate."""

    def __init__(self, message, last_z=None, iterations=None):
        super().__init__(message)
        self.last_z = last_z
        self.iterations = iterations
