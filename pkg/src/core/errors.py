"""
Exception hierarchy for FlexPlanner.

Every error carries the process exit code the CLI reports and a human-readable
detail message, in the spirit of HTTPException(status_code, detail).
"""

from typing import Optional

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_VALIDATION = 3
EXIT_VIOLATION = 4


class PlannerError(Exception):
    """Base error: `detail` is shown to the user, `exit_code` ends the process."""
    exit_code: int = EXIT_VALIDATION

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class GridError(PlannerError):
    pass


class ResourceError(PlannerError):
    pass


class PolicyError(PlannerError):
    pass


class LpError(PlannerError):
    pass


class ScenarioError(PlannerError):
    """Invalid scenario or result file; `problems` lists JSON-pointer messages."""

    def __init__(self, detail: str, problems: Optional[list[str]] = None):
        super().__init__(detail)
        self.problems = problems or []


class InfeasibleError(PlannerError):
    exit_code = EXIT_INFEASIBLE

    def __init__(self, detail: str, status: str = "infeasible", family: Optional[str] = None):
        super().__init__(detail)
        self.status = status
        self.family = family


class SimulationViolationError(PlannerError):
    exit_code = EXIT_VIOLATION
