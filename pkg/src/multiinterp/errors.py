"""Exception types shared by the numerical modules."""


class DomainError(ValueError):
    """An argument lies outside the domain of a function (e.g. t <= 0)."""


class StructureError(ValueError):
    """A Boyd function tree is malformed (e.g. inverse of a non-monotone node)."""


class InputError(ValueError):
    """Sampled data is unusable (NaN, negative, wrong shape)."""


class PreconditionError(ValueError):
    """A hypothesis required by an operation does not hold."""


class ConfigError(ValueError):
    """A configuration file or descriptor cannot be interpreted."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SolverError(RuntimeError):
    """A convex solve stopped before meeting its tolerance.

    ``upper`` and ``lower`` carry the best certified bound pair found.
    """

    def __init__(self, message, upper=None, lower=None):
        super().__init__(message)
        self.upper = upper
        self.lower = lower


class NonConvergenceError(RuntimeError):
    """Grid refinement exhausted its budget; ``trace`` holds the levels tried."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class ConsistencyError(RuntimeError):
    """A numerically computed quantity violates a bound it must satisfy."""
