"""Exception hierarchy shared by every module.

The CLI maps these onto process exit codes, so library code raises the most
specific class that applies instead of bare ``ValueError``.
"""


class FinresError(Exception):
    exit_code = 1


class ValidationError(FinresError, ValueError):
    """Bad input: wrong shape, malformed file, missing column, bad range."""

    exit_code = 2


class NumericalError(FinresError, ArithmeticError):
    """A computation could not be completed (singular matrix, failed factorization)."""

    exit_code = 3

    def __init__(self, message, iteration=None, block=None):
        self.iteration = iteration
        self.block = block
        parts = [message]
        if block is not None:
            parts.append(f"block={block}")
        if iteration is not None:
            parts.append(f"iteration={iteration}")
        super().__init__(", ".join(parts))


class DataIOError(FinresError, OSError):
    exit_code = 4


class ParseError(ValidationError):
    """A CSV cell or row could not be parsed; carries its location."""

    def __init__(self, message, line=None, column=None, path=None):
        self.line = line
        self.column = column
        self.path = path
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if column is not None:
            loc.append(f"column {column!r}")
        prefix = ":".join(loc)
        super().__init__(f"{prefix}: {message}" if prefix else message)
