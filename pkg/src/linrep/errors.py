"""Exception hierarchy shared by every solver module.

The CLI maps these onto process exit codes, so each class carries the
category it belongs to rather than relying on message parsing.
"""


class LinrepError(Exception):
    exit_code = 1


class ValidationError(LinrepError, ValueError):
    """Bad inputs: out-of-range parameters, malformed configs, CFL violations."""

    exit_code = 2

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class StabilityError(ValidationError):
    pass


class UnderResolvedError(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class UnsupportedError(ValidationError):
    pass


class BudgetError(LinrepError):
    """A requested grid or dense operator exceeds the configured size budget."""

    exit_code = 3


class DivergenceError(LinrepError, ArithmeticError):
    exit_code = 4


class CausticError(DivergenceError):
    pass
