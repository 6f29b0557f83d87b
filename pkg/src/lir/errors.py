"""Exception hierarchy for the lir package.

Every failure mode raises a subclass of LirError so callers (and the CLI)
can distinguish data problems from numerical ones without string matching.
"""


class LirError(Exception):
    """Base class for all errors raised by this package."""


class InvalidMatrix(LirError):
    """Matrix input is empty, non-rectangular, or contains non-finite entries."""


class InvalidVector(LirError):
    """Vector or record field is empty or contains non-finite entries."""


class DimensionError(LirError):
    """Operands have incompatible dimensions."""


class RankError(LirError):
    """Requested rank or component count is outside the valid range."""


class ZeroVectorError(LirError):
    """Operation is undefined for a zero-length vector."""


class NumericalFailure(LirError):
    """An iterative routine did not converge within its budget."""

    def __init__(self, message: str, iterations: int):
        super().__init__(message)
        self.iterations = iterations


class LanguageMismatch(LirError):
    """Record and basis (or records in one set) carry different language tags."""


class MissingBasis(LirError):
    """No component basis is available for a record's language."""

    def __init__(self, lang: str):
        super().__init__(f"no component basis for language {lang!r}")
        self.lang = lang


class NoRelevantError(LirError):
    """A query has an empty relevant set."""


class DegenerateLabels(LirError):
    """Training labels contain fewer than two classes."""


class DatasetError(LirError):
    """A retrieval dataset violates a structural invariant."""


class ConfigError(LirError):
    """Invalid generator or harness configuration."""


class FormatError(LirError):
    """A file violates the expected binary or JSON layout."""


class TruncatedFile(FormatError):
    """A file ended before its declared payload was fully read."""


class CorruptBasis(LirError):
    """A stored component basis is too far from orthonormal."""


class ParseError(LirError):
    """A malformed line in a line-oriented input file."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DuplicateKey(LirError):
    """An identifier that must be unique appeared more than once."""

    def __init__(self, key: str, message: str | None = None):
        super().__init__(message or f"duplicate key {key!r}")
        self.key = key
