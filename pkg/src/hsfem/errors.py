"""Exception hierarchy shared by all hsfem modules."""


class HSFEMError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(HSFEMError, ValueError):
    pass


class DomainError(HSFEMError, ValueError):
    """A value lies outside the domain of a constitutive law (e.g. n < 0)."""


class GeometryError(HSFEMError):
    """Degenerate or inverted element."""


class UnsupportedMeshError(HSFEMError):
    """The mesh lacks the angle property a scheme relies on."""


class EvaluationError(HSFEMError, ValueError):
    pass


class NonConvergenceError(HSFEMError):
    """Raised by the linear solver; ``report`` carries the last iterate's stats."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


class ConfigError(HSFEMError):
    """Configuration problem. ``problems`` lists one message per offending key."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class SimulationAborted(HSFEMError):
    """A time step failed. ``last_state`` is the last state that completed."""

    def __init__(self, message, last_state, cause=None):
        super().__init__(message)
        self.last_state = last_state
        self.cause = cause
