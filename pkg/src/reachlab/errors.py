"""Exception hierarchy shared by every reachlab module."""


class ReachLabError(Exception):
    """Base class for all errors raised by reachlab."""


class ExprError(ReachLabError, ValueError):
    pass


class ExprSyntaxError(ExprError):
    """Malformed expression text. ``position`` is 1-based; len(src)+1 means end of input."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.message = message
        self.position = position


class UnknownIdentifierError(ExprError):
    pass


class UnboundVariableError(ExprError):
    pass


class DomainError(ExprError, ArithmeticError):
    """Evaluation left the real domain (division by zero, sqrt of a negative, ...)."""


class DimensionError(ReachLabError, ValueError):
    pass


class ProjectionError(ReachLabError, ArithmeticError):
    """Hull projection hit its iteration cap."""


class BlowUpError(ReachLabError, ArithmeticError):
    """A trajectory left every bounded set before the requested horizon."""

    def __init__(self, time: float, message: str = "", control=None, row: int | None = None):
        text = f"trajectory blew up at t={time:.6g}"
        if message:
            text += f": {message}"
        super().__init__(text)
        self.time = time
        self.control = control
        self.row = row


class BudgetExceededError(ReachLabError, RuntimeError):
    pass


class PreconditionError(ReachLabError, ValueError):
    pass


class ConfigError(ReachLabError, ValueError):
    """Invalid experiment configuration. ``field`` names the offending key path."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = (", ".join(where) + ": ") if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line
