"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


class ConfigError(ValueError):
    """Raised when an experiment configuration fails validation.

    ``problems`` lists one message per offending field.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class CalibrationError(RuntimeError):
    """Raised when a baseline-accuracy target cannot be bracketed."""

    def __init__(self, message, bracket=None):
        self.bracket = bracket
        super().__init__(message)
