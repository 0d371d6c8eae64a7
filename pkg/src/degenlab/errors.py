"""Exception hierarchy shared by all degenlab modules."""


class DegenlabError(Exception):
    """Base class for every error raised by degenlab."""


# geometry
class InvalidDomainParams(DegenlabError, ValueError):
    pass


class PointOutsideDomain(DegenlabError, ValueError):
    pass


class GridTooCoarse(DegenlabError, ValueError):
    pass


# operators
class InvalidOperatorParams(DegenlabError, ValueError):
    pass


class NoValidAlpha(DegenlabError, ArithmeticError):
    pass


# scheme / solve
class DegenerateTimestep(DegenlabError, ArithmeticError):
    pass


class NonFiniteValue(DegenlabError, ArithmeticError):
    """The iteration blew up; carries the iteration count and last sup-norm."""

    def __init__(self, message, iteration=None, sup_norm=None):
        super().__init__(message)
        self.iteration = iteration
        self.sup_norm = sup_norm


class NotConverged(DegenlabError, RuntimeError):
    pass


# analysis
class OutOfDomain(DegenlabError, ValueError):
    pass


class SupercriticalParams(DegenlabError, ValueError):
    pass


class EmptyFilter(DegenlabError, ValueError):
    pass


class DegenerateField(DegenlabError, ValueError):
    pass


class NonPositiveTrace(DegenlabError, ValueError):
    pass


# harness
class ParseError(DegenlabError, ValueError):
    def __init__(self, message, line=None, column=None):
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{loc}")
        self.line = line
        self.column = column


class ValidationError(DegenlabError, ValueError):
    pass


class IoError(DegenlabError, OSError):
    pass
