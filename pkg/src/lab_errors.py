"""
Exception hierarchy shared by every stage of the lab
"""
from typing import Optional


class PutLabError(Exception):
    """Base class for all errors raised by the lab."""


class ValidationError(PutLabError, ValueError):
    """An input violated one of the model invariants."""


class PreconditionError(ValidationError):
    """An operation was called with inputs outside its precondition."""


class StationaryPointError(PutLabError, ArithmeticError):
    """The Arrow-Pratt measure was requested where u'(x) vanishes."""


class DatasetError(PutLabError, OSError):
    """The embedded printed-values dataset is missing or corrupt."""


class ConfigParseError(PutLabError):
    """
    A config file could not be parsed or has a malformed field.

    Attributes:
        field(str): dotted path of the offending field, if known
        line(int): 1-based line number, if known
    """

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        location = []
        if field:
            location.append(f"field '{field}'")
        if line is not None:
            location.append(f"line {line}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
