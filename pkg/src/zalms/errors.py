"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class MomentConsistencyError(ArithmeticError):
    """Moment pair (m, K) implies a negative variance or a non-PSD pair covariance."""

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)
        self.iteration = iteration


class OracleFailure(RuntimeError):
    """A verification oracle did not converge within its budget."""


class DivergenceError(RuntimeError):
    """An ensemble trajectory produced non-finite weights."""

    def __init__(self, message, run_id=None, iteration=None):
        super().__init__(message)
        self.run_id = run_id
        self.iteration = iteration


class ConfigError(ValueError):
    """Experiment configuration could not be parsed or validated."""
