"""Error hierarchy shared by the numeric, symbolic and CLI layers"""

from typing import Any, Dict, Optional


class HeegnerError(Exception):
    """Base class for every error raised by the package"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        return {"type": type(self).__name__, "message": self.message, **self.details}


# numeric layer

class NumericError(HeegnerError):
    pass


class PrecisionExhausted(NumericError):
    """The requested accuracy cannot be reached within the bit budget"""


class InsufficientPrecision(PrecisionExhausted):
    """Input precision is below the certification margin"""


class DegenerateLattice(NumericError):
    pass


class PoleAtZ(NumericError):
    pass


class PoleAtTorsion(NumericError):
    pass


# symbolic and arithmetic layer

class UnsupportedN(HeegnerError):
    pass


class DivisionFails(HeegnerError):
    pass


class InvalidD(HeegnerError):
    pass


class CaseMismatch(HeegnerError):
    pass


class SingularBasis(HeegnerError):
    pass


class HypothesisViolated(HeegnerError):
    def __init__(self, condition: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(f"Hypothesis violated: {condition}", {"condition": condition, **(details or {})})
        self.condition = condition


class MissingBetaQ(HeegnerError):
    pass


class InvalidC(HeegnerError):
    pass


class DegenerateLevel(HeegnerError):
    pass


class Falsified(HeegnerError):
    """A check that should hold exactly did not"""


# runtime layer

class InvalidConfig(HeegnerError):
    def __init__(self, field: str, message: str):
        super().__init__(f"Invalid config field '{field}': {message}", {"field": field})
        self.field = field


class CorruptCache(HeegnerError):
    pass


class UsageError(HeegnerError):
    pass
