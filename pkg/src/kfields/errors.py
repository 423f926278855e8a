"""Exception types raised across the package."""


class KFieldsError(Exception):
    pass


class UnboundVariable(KFieldsError, KeyError):
    def __init__(self, name):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"unbound variable {self.name!r}"


class DivisionByZero(KFieldsError, ZeroDivisionError):
    pass


class ParseError(KFieldsError, ValueError):
    """Malformed expression text; `position` is the 0-based column."""

    def __init__(self, message, text, position):
        self.message = message
        self.text = text
        self.position = position
        super().__init__(f"{message} at column {position + 1}: {text!r}")


class SchemaError(KFieldsError, ValueError):
    pass


class ChartMismatch(KFieldsError, ValueError):
    pass


class GridTooSmall(KFieldsError, ValueError):
    pass


class GaugeConstraintViolated(KFieldsError, ValueError):
    pass


class NotProjectable(KFieldsError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class CflViolated(KFieldsError, ValueError):
    def __init__(self, cfl):
        super().__init__(f"CFL number {cfl:.6g} exceeds 1")
        self.cfl = cfl


class NonFiniteState(KFieldsError, FloatingPointError):
    pass


class DomainMismatch(KFieldsError, ValueError):
    pass
