"""gridnadir Errors."""

from typing import Optional


class BaseError(Exception):
    """Generic exception class which other exceptions should subclass."""

    exit_code = 1

    def __init__(self, *args, error_code: Optional[str] = None, **kwargs):
        """Initialize a BaseError instance."""
        super().__init__(*args, **kwargs)
        self.error_code = error_code

    @property
    def message(self) -> str:
        """Accessor for the error message."""
        return str(self.args[0]).strip() if self.args else ""


class DomainError(BaseError):
    """Bad data, infeasibility or a failed computation."""


class DataError(DomainError):
    """Input data failed to parse, validate or resolve."""


class SimulationError(DomainError):
    """Frequency simulation produced a non-finite state."""

    def __init__(self, *args, step: Optional[int] = None, time: Optional[float] = None):
        """Initialize with the first bad timestep."""
        super().__init__(*args, error_code="simulation")
        self.step = step
        self.time = time


class ModelError(DomainError):
    """Optimization model construction error."""


class InfeasibleError(DomainError):
    """Optimization problem has no feasible point."""

    def __init__(self, *args, mode: Optional[str] = None):
        """Initialize with the planning mode that was being solved."""
        super().__init__(*args, error_code="infeasible")
        self.mode = mode


class NoSecureControlError(InfeasibleError):
    """No emergency control schedule keeps every area secure."""

    def __init__(self, *args, emergency=None):
        """Initialize with the offending emergency."""
        super().__init__(*args)
        self.emergency = emergency


class SolverError(BaseError):
    """External solver failure."""


class SolverNotFoundError(SolverError):
    """Solver executable is missing."""

    exit_code = 3

    def __init__(self, *args, path: Optional[str] = None):
        """Initialize with the missing path."""
        super().__init__(*args, error_code="solver-missing")
        self.path = path


class SolverExitError(SolverError):
    """Solver exited with a nonzero status."""

    def __init__(self, *args, returncode: Optional[int] = None, log: str = ""):
        """Initialize with the solver return code and log text."""
        super().__init__(*args, error_code="solver-exit")
        self.returncode = returncode
        self.log = log


class SolutionParseError(SolverError):
    """Solver solution file could not be parsed."""


class UsageError(BaseError):
    """Bad command line usage."""

    exit_code = 2
