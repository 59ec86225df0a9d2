"""Exception types shared by the simulation modules."""


class ConfigurationError(ValueError):
    """Parameters are outside the domain where a model is defined."""


class ResolutionError(ValueError):
    """A sampling grid is too coarse for the requested computation."""


class NumericalError(RuntimeError):
    """An iterative or integration routine failed its own accuracy checks."""


class ValidationError(ConfigurationError):
    """An experiment configuration failed validation.

    ``problems`` lists every violated precondition so a user can fix them
    in one pass.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems) if self.problems else "invalid configuration")
