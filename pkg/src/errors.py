"""Exception hierarchy for the peaks solver.

Every error carries the exit status the command line reports for it:
input problems exit with 2, failed certificates with 1.
"""

from typing import Any, Optional, Sequence


class PeaksError(Exception):
    """Base class for all solver errors."""

    exit_code = 2


class ParameterError(PeaksError):
    """A parameter lies outside its admissible range."""


class DomainError(PeaksError):
    """A value lies outside the domain of a function or its inverse."""


class PreconditionError(PeaksError):
    """An operation was called on inputs that break its precondition."""


class CertificateRequiredError(PeaksError):
    """The operation needs a verified certificate or tail bound."""


class DegenerateInputError(PeaksError):
    """Sampling found nothing the operation can work with."""


class EnvelopeClassError(PeaksError):
    """The envelope h does not dominate the supremum structure of u."""


class ValueRangeError(PeaksError):
    """A computed quantity fell outside its required range."""


class EvaluationError(PeaksError):
    """A sequence term could not be evaluated."""

    def __init__(self, message: str, k: int):
        super().__init__(message)
        self.k = k


class OrbitDivergenceError(PeaksError):
    """An orbit left the representable range."""

    def __init__(self, message: str, point: Sequence[float], step: int):
        super().__init__(message)
        self.point = tuple(float(v) for v in point)
        self.step = step


class ViolationError(PeaksError):
    """A certificate inequality failed at a witness."""

    exit_code = 1

    def __init__(self, message: str, witness: Optional[Any] = None):
        super().__init__(message)
        self.witness = witness


class NotUsefulError(PeaksError):
    """The pair never lets the stopping formula terminate."""

    exit_code = 1


class ExpressionError(PeaksError):
    """Base class for expression language errors."""


class ExpressionSyntaxError(ExpressionError):
    """Malformed expression text."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UndeclaredVariableError(ExpressionError):
    """The expression references a name that was not declared."""

    def __init__(self, name: str, offset: int):
        super().__init__(f"Undeclared variable '{name}' at offset {offset}")
        self.name = name
        self.offset = offset


class ExpressionEvaluationError(ExpressionError):
    """Evaluation hit a domain violation or an unbound variable."""

    def __init__(self, message: str, node: Any = None):
        super().__init__(message)
        self.node = node
