"""
Exception hierarchy shared by every layer of noether-bench
"""
from typing import Iterable, Optional, Sequence


class NoetherBenchError(Exception):
    """Base class of all errors raised by the library"""


# Expressions

class ExpressionError(NoetherBenchError):
    pass


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message: str, offset: int, expected: Iterable[str] = (), source: str = ""):
        self.offset = offset
        self.expected = frozenset(expected)
        self.source = source
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += f" (expected one of: {', '.join(sorted(self.expected))})"
        super().__init__(detail)


class UnknownFunctionError(ExpressionSyntaxError):
    pass


class NonConstantExponentError(ExpressionSyntaxError):
    pass


class UndeclaredNameError(ExpressionError):
    def __init__(self, name: str, reason: str = "undeclared name"):
        self.name = name
        super().__init__(f"{reason}: '{name}'")


class EvaluationDomainError(ExpressionError):
    def __init__(self, message: str, subexpression: str):
        self.subexpression = subexpression
        super().__init__(f"{message} in '{subexpression}'")


# Mechanics

class MechanicsError(NoetherBenchError):
    pass


class NotPositiveDefiniteError(MechanicsError):
    pass


class RankDeficiencyError(MechanicsError):
    def __init__(self, rank: int, expected: int, rows: Sequence[str] = ()):
        self.rank = rank
        self.expected = expected
        self.rows = tuple(rows)
        super().__init__(
            f"constraint matrix has rank {rank}, expected {expected} (rows: {', '.join(self.rows) or '-'})"
        )


class SingularMultiplierSystemError(MechanicsError):
    def __init__(self, condition: float, rows: Sequence[str]):
        self.condition = condition
        self.rows = tuple(rows)
        super().__init__(
            f"multiplier system is singular (condition {condition:.3e}) for rows: {', '.join(self.rows)}"
        )


class OffManifoldError(MechanicsError):
    def __init__(self, residual: float, tolerance: float):
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(f"state is off the constrained manifold: residual {residual:.3e} > {tolerance:.1e}")


class ProjectionDivergenceError(MechanicsError):
    pass


class NonFiniteStateError(MechanicsError):
    def __init__(self, t: float, step: Optional[int] = None):
        self.t = t
        self.step = step
        super().__init__(f"non-finite state at t={t!r}" + (f" (step {step})" if step is not None else ""))


# Symmetries

class SymmetryError(NoetherBenchError):
    pass


class NotClosedFormError(SymmetryError):
    pass


class InadmissibleFieldError(SymmetryError):
    pass


# Scenarios

class ScenarioError(NoetherBenchError):
    def __init__(self, message: str, section: Optional[str] = None, key: Optional[str] = None,
                 line: Optional[int] = None, offset: Optional[int] = None, path: Optional[str] = None):
        self.section = section
        self.key = key
        self.line = line
        self.offset = offset
        self.path = path
        where = []
        if path:
            where.append(str(path) + (f":{line}" if line else ""))
        elif line:
            where.append(f"line {line}")
        if section:
            where.append(f"[{section}]")
        if key:
            where.append(key)
        if offset is not None:
            where.append(f"offset {offset}")
        prefix = " ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
