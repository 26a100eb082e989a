"""Exception types shared across modules, each tied to a CLI exit code."""


class LadderPercError(Exception):
    exit_code = 1


class ValidationError(LadderPercError, ValueError):
    """Malformed experiment file or invalid parameters."""

    exit_code = 2


class InfeasibleCouplingError(LadderPercError):
    """The feasibility predicate of a coupling construction fails."""

    exit_code = 3

    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report or {}


class HardAssertionError(LadderPercError, AssertionError):
    """A per-sample guarantee (clause, containment, reach implication) was violated."""

    exit_code = 4

    def __init__(self, message: str, record: dict | None = None):
        super().__init__(message)
        self.record = record or {}


class BudgetExceededError(LadderPercError):
    """An enumeration would exceed its declared budget."""

    exit_code = 5
