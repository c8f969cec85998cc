from typing import Optional, Tuple


class LinkscrubError(Exception):
    """Any error raised by linkscrub"""


class ParsingError(LinkscrubError):
    """Input could not be parsed"""


class UrlParsingError(ParsingError):
    def __init__(self, message: str, url: str = "", span: Optional[Tuple[int, int]] = None):
        self.url = url
        self.span = span

        if span is not None:
            start, end = span
            message = f"{message} at {start}:{end} ({url[start:end]!r})"

        super(UrlParsingError, self).__init__(message)


class TraceParsingError(ParsingError):
    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number

        if line_number is not None:
            message = f"line {line_number}: {message}"

        super(TraceParsingError, self).__init__(message)


class RuleSyntaxError(ParsingError):
    def __init__(self, message: str, rule: str = ""):
        self.rule = rule
        super(RuleSyntaxError, self).__init__(f"{message}: {rule!r}")


class ModelFormatError(ParsingError):
    """Persisted forest file is not readable"""


class InvariantViolation(LinkscrubError):
    """A documented invariant does not hold for the supplied data"""


class TraceValidationError(InvariantViolation):
    pass


class FeatureVersionError(InvariantViolation):
    """Feature names or version of the data do not match the model"""


class DatasetError(InvariantViolation):
    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column

        if row is not None:
            message = f"{message} (row {row}, column {column})"

        super(DatasetError, self).__init__(message)


class NotFoundError(InvariantViolation):
    """Requested node, label or pattern is not present"""


__all__ = [
    "LinkscrubError",
    "ParsingError",
    "UrlParsingError",
    "TraceParsingError",
    "RuleSyntaxError",
    "ModelFormatError",
    "InvariantViolation",
    "TraceValidationError",
    "FeatureVersionError",
    "DatasetError",
    "NotFoundError",
]
