"""Exception taxonomy shared by all modules."""


class LayoutError(Exception):
    """Base class for all errors raised by this package."""


class InputError(LayoutError):
    """Bad caller input: unknown ids, mismatched dimensions, malformed values."""


class ParseError(InputError):
    """Malformed file content. Carries the offending line number when known."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)


class ModelError(LayoutError):
    """Structurally unusable model: disconnected graph, infeasible instance, size caps."""


class ValidationError(LayoutError):
    """Data or solution fails a semantic check (unknown products, infeasible assignment)."""
