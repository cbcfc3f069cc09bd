"""Exception hierarchy shared by all engines."""

from __future__ import annotations


class SwidError(Exception):
    """Base class. ``where`` collects evaluation-context annotations."""

    def __init__(self, message: str = "") -> None:
        super().__init__(message)
        self.message = message
        self.where: list[str] = []

    def annotate(self, note: str) -> "SwidError":
        self.where.append(note)
        return self

    def __str__(self) -> str:
        if not self.where:
            return self.message
        return f"{self.message} [{'; '.join(self.where)}]"


class GraphError(SwidError):
    pass


class CycleError(GraphError):
    def __init__(self, cycle: list[str]) -> None:
        super().__init__("cycle: " + " -> ".join(cycle))
        self.cycle = cycle


class UnknownNode(GraphError):
    def __init__(self, name: str) -> None:
        super().__init__(f"unknown node {name!r}")
        self.name = name


class DuplicateNode(GraphError):
    def __init__(self, name: str) -> None:
        super().__init__(f"duplicate node {name!r}")
        self.name = name


class OverlappingSets(GraphError):
    pass


class RegimeOrderError(GraphError):
    pass


class NoDesignatedOutcome(GraphError):
    pass


class DistError(SwidError):
    pass


class UnknownVariable(DistError):
    def __init__(self, name: str) -> None:
        super().__init__(f"unknown variable {name!r}")
        self.name = name


class ZeroConditioningMass(DistError):
    def __init__(self, given: object) -> None:
        super().__init__(f"conditioning event has zero mass: {given}")
        self.given = given


class SizeLimit(DistError):
    pass


class ScmError(SwidError):
    pass


class InfeasibleFloor(ScmError):
    pass


class IdentError(SwidError):
    pass


class PositivityError(IdentError):
    def __init__(self, report: object) -> None:
        super().__init__(f"positivity violated: {report}")
        self.report = report


class EmptyCell(IdentError):
    def __init__(self, step: str, assignment: dict) -> None:
        super().__init__(f"no rows in conditioning cell {assignment} at step {step}")
        self.step = step
        self.assignment = assignment


class UnknownScenario(IdentError):
    pass
