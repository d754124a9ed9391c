"""Exception hierarchy shared by all nerfuse modules."""


class NerfuseError(Exception):
    """Base class for all toolkit errors (maps to CLI exit code 2)."""


class ParseError(NerfuseError):
    """Malformed input file. Carries a human-readable location when known."""

    def __init__(self, message, line=None, record_id=None):
        loc = ""
        if line is not None:
            loc = f" (line {line})"
        elif record_id is not None:
            loc = f" (record {record_id!r})"
        super().__init__(message + loc)
        self.line = line
        self.record_id = record_id


class ValidationError(NerfuseError):
    """A domain invariant was violated."""


class SerializeError(NerfuseError):
    """Content cannot be expressed in the requested output format."""


class EvaluatorError(NerfuseError):
    """External evaluator hook failed (maps to CLI exit code 3)."""
