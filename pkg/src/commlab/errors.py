"""Exception types shared across the package."""


class CommlabError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""

    exit_code = 1


class ParseError(CommlabError, ValueError):
    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class DomainError(CommlabError, ValueError):
    pass


class NumericError(CommlabError, ArithmeticError):
    pass


class GuardError(CommlabError):
    """A size guard refused to run a dense or memory-heavy computation."""

    exit_code = 3
