"""Exception hierarchy."""

from __future__ import annotations


class BornLabError(Exception):
    """Base class for all errors raised by this package."""


class InvariantError(BornLabError, ValueError):
    """A value failed the invariants of its type (not unit norm, not PSD, ...)."""


class DimensionError(BornLabError, ValueError):
    pass


class DegenerateProjectionError(BornLabError, ArithmeticError):
    pass


class ConditioningError(BornLabError, ArithmeticError):
    def __init__(self, condition_number: float, limit: float):
        super().__init__(
            f"least-squares system is ill conditioned: cond={condition_number:.3g} > {limit:.3g}"
        )
        self.condition_number = condition_number
        self.limit = limit


class ZeroDenominatorError(BornLabError, ArithmeticError):
    pass


class RuleSpecError(BornLabError, ValueError):
    """Unrecognised rule identifier on the command line."""


class DSLError(BornLabError, ValueError):
    """Base class for g-function language errors."""


class DSLSyntaxError(DSLError):
    def __init__(self, message: str, offset: int, expected: frozenset[str] | set[str] = frozenset()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f" (expected {', '.join(sorted(self.expected))})" if self.expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class UnknownIdentifierError(DSLError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r} at offset {offset}")


class GDomainError(DSLError, ArithmeticError):
    """Evaluation left the domain of a primitive (log of ~0, sqrt of negative, ...)."""

    def __init__(self, message: str, x: float):
        self.x = float(x)
        super().__init__(f"{message} at x={self.x!r}")


class ConstraintError(DSLError):
    """A g-function violates one of the premises g(0) = 0, g >= 0, finite on [0, 1]."""

    def __init__(self, premise: str, x: float, value: float):
        self.premise = premise
        self.x = float(x)
        self.value = float(value)
        super().__init__(f"g violates {premise}: g({self.x!r}) = {self.value!r}")
