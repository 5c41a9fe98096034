"""Exception hierarchy shared by every package in the toolkit."""

from typing import Optional


class ExprError(ValueError):
    """Problem with the text of an expression."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class ExprSyntaxError(ExprError):
    pass


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"Unknown identifier '{name}'", offset)
        self.name = name


class IndexOutOfRangeError(ExprError):
    def __init__(self, name: str, limit: int, offset: int):
        super().__init__(f"Variable '{name}' out of range (declared dimension {limit})", offset)
        self.name = name
        self.limit = limit


class EvaluationError(ValueError):
    """Numerical failure at a concrete point.

    Carries the serialized subexpression that failed and the point
    (a ``Point``) at which it was evaluated.
    """

    def __init__(self, message: str, subexpression: str, point=None):
        detail = f"{message} in '{subexpression}'"
        if point is not None:
            detail += f" at {point}"
        super().__init__(detail)
        self.subexpression = subexpression
        self.point = point


class DomainError(EvaluationError):
    pass


class NonDifferentiableError(EvaluationError):
    pass


class ProblemFileError(ValueError):
    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")
        self.key = key
        self.line = line


class InvariantError(ValueError):
    pass


class NotAdmissibleError(ValueError):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class SamplingError(ValueError):
    pass


class SolverError(ValueError):
    pass
