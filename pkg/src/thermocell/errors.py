"""Exception types and process exit codes shared across the package."""

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_CONFIG = 3


class ThermocellError(Exception):
    """Base class for all package errors."""


class ConfigError(ThermocellError):
    """Bad configuration input: unknown key, type mismatch, missing field."""


class StructuralError(ConfigError):
    """Data shaped wrong for the mesh, e.g. an electrode-only field supplied
    with separator entries.  Distinct from a hypothesis failure: the input is
    malformed, not merely physically inadmissible."""


class ValidationFailure(ThermocellError):
    """One of the admissibility checks H1..H7 (or u0 positivity) failed."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SolverFailure(ThermocellError):
    """A nonlinear or linear solve did not converge."""

    def __init__(self, message, trace=None, stage=None, partial=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []
        self.stage = stage
        self.partial = partial
