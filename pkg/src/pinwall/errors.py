"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument is outside the documented domain."""


class RegimeError(ValueError):
    """The requested quantity does not exist in this phase/regime."""


class DivergenceError(ValueError):
    """A series or limit that the caller asked for diverges."""


class ConvergenceError(RuntimeError):
    """An iteration failed to reach its tolerance within its budget."""


class ResourceError(RuntimeError):
    """A computation exceeded an explicit size or memory budget."""
