"""Exception hierarchy shared by every ladderforge module."""


class LadderError(ValueError):
    """Base class for all input/contract errors raised by ladderforge."""


class ParseError(LadderError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownConfigError(ParseError):
    pass


class DuplicateCellError(ParseError):
    pass


class RangeError(ParseError):
    pass


class FormatError(LadderError):
    pass


class CompletenessError(LadderError):
    pass


class EmptyInputError(LadderError):
    pass


class ShapeError(LadderError):
    pass


class ExtrapolationError(LadderError):
    pass


class OverlapError(LadderError):
    pass


class EmptyPlanError(LadderError):
    pass


class AlignmentError(LadderError):
    pass


class UndefinedMetricError(LadderError):
    pass


class StateError(RuntimeError):
    """Raised when an operation is invoked in an invalid lifecycle state."""


class EncodeError(RuntimeError):
    """Wraps a failure raised by an encoder callback, keeping the failing config."""

    def __init__(self, config, cause):
        self.config = config
        self.cause = cause
        super().__init__(f"encode failed for {config}: {cause!r}")
