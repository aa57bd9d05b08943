"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid argument, configuration, or file content."""


class NumericError(RuntimeError):
    """Numerical failure (NaN/Inf objective) during a solver run.

    Carries the partial solver trace in ``trace`` when one is available.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
