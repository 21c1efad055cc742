"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class SafeScoreError(Exception):
    """Base class for every error raised by this package."""


# -- task spec ---------------------------------------------------------------


class SpecError(SafeScoreError, ValueError):
    """A task spec document could not be turned into a valid TaskSpec."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class SpecSyntaxError(SpecError):
    pass


class UnknownPredicateKind(SpecError):
    pass


class DanglingObjectReference(SpecError):
    def __init__(self, object_id: str, line: int | None = None, column: int | None = None):
        self.object_id = object_id
        super().__init__(f"reference to undeclared object {object_id!r}", line, column)


class DuplicateObjectId(SpecError):
    def __init__(self, object_id: str, line: int | None = None, column: int | None = None):
        self.object_id = object_id
        super().__init__(f"object {object_id!r} declared more than once", line, column)


class ArityError(SpecError):
    pass


class InvalidTaskSpec(SpecError):
    """Raised when a parsed spec still breaks an invariant; carries the diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(d.message for d in self.diagnostics))


# -- trajectory logs ---------------------------------------------------------


class TrajectoryError(SafeScoreError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class MissingHeader(TrajectoryError):
    pass


class MalformedRecord(TrajectoryError):
    pass


class NonMonotoneTime(TrajectoryError):
    pass


class UnnormalizedQuaternion(TrajectoryError):
    pass


class InconsistentObjectSet(TrajectoryError):
    pass


# -- predicates --------------------------------------------------------------


class PredicateError(SafeScoreError):
    """Goal evaluation failed; ``goal_index`` is filled in by eval_goals."""

    goal_index: int | None = None

    def __str__(self) -> str:
        msg = super().__str__()
        if self.goal_index is not None:
            return f"goal {self.goal_index}: {msg}"
        return msg


class MissingObjectState(PredicateError):
    pass


class MissingFlag(PredicateError):
    pass


# -- metrics / scoring -------------------------------------------------------


class MetricError(SafeScoreError, ValueError):
    pass


class EmptyGoals(MetricError):
    pass


class LengthMismatch(MetricError):
    pass


class TaskMismatch(SafeScoreError, ValueError):
    pass


# -- analysis ----------------------------------------------------------------


class AnalysisError(SafeScoreError, ValueError):
    pass


class EmptyInput(AnalysisError):
    pass


class MixedTasks(AnalysisError):
    pass


class MixedGoalCount(AnalysisError):
    pass


class UnknownCategory(AnalysisError):
    def __init__(self, category: str, row: int | None = None):
        self.category = category
        self.row = row
        where = f"row {row}: " if row is not None else ""
        super().__init__(f"{where}unknown failure category {category!r}")


class DuplicateAnnotation(AnalysisError):
    pass


# -- synthgen ----------------------------------------------------------------


class InvalidParams(SafeScoreError, ValueError):
    pass
