"""Exception hierarchy shared by every module."""


class MGCNError(Exception):
    pass


class DimensionError(MGCNError, ValueError):
    """Operand shapes do not chain."""


class ParameterError(MGCNError, ValueError):
    """A scalar argument is outside its admissible range."""


class DataError(MGCNError, ValueError):
    """Input data is malformed or inconsistent."""


class UsageError(MGCNError, RuntimeError):
    """An API or CLI contract was violated by the caller."""


class DivergenceError(MGCNError, ArithmeticError):
    """Training produced a non-finite loss."""
