"""Exception taxonomy shared by all modules and surfaced by the CLI."""


class MMRError(Exception):
    """Base class for every error raised by mmrkit."""


class DomainError(MMRError, ValueError):
    """An argument lies outside the domain of the operation."""


class BracketError(DomainError):
    """The root-finding bracket does not straddle a sign change."""


class ConvergenceError(MMRError, RuntimeError):
    """An iterative method ran out of iterations.

    ``best`` holds the last iterate so callers can decide whether it is usable.
    """

    def __init__(self, message: str, best: float | None = None):
        super().__init__(message)
        self.best = best


class RegimeError(DomainError):
    """The model is in the threshold regime where k* is undefined."""


class IngestError(MMRError):
    """Base class for input-file problems."""


class ParseError(IngestError):
    def __init__(self, message: str, line: int | None = None, column: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.column = column


class ConstraintError(IngestError):
    def __init__(self, message: str, row: int | None = None, constraint: str | None = None):
        prefix = f"row {row}: " if row is not None else ""
        super().__init__(prefix + message)
        self.row = row
        self.constraint = constraint


class MissingParameterError(IngestError):
    def __init__(self, name: str):
        super().__init__(f"missing required parameter {name!r}")
        self.name = name
