"""Exception hierarchy shared by every module."""


class GaitPDError(ValueError):
    """Base class for data and contract errors raised by gaitpd."""


class MalformedHeader(GaitPDError):
    pass


class RaggedRows(GaitPDError):
    pass


class NonFiniteForce(GaitPDError):
    pass


class TimestampMismatch(GaitPDError):
    pass


class GapAtBoundary(GaitPDError):
    pass


class MissingMarker(GaitPDError):
    pass


class TooShort(GaitPDError):
    pass


class InsufficientEvents(GaitPDError):
    pass


class OutOfRange(GaitPDError):
    pass


class DimensionMismatch(GaitPDError):
    pass


class OnsetOutsideSegmentation(GaitPDError):
    pass


class InsufficientHistory(GaitPDError):
    pass


class EmptyTrialSet(GaitPDError):
    pass


class InvalidSpec(GaitPDError):
    pass


class TooFewSamples(GaitPDError):
    pass


class DegenerateAllConstant(GaitPDError):
    pass


class EmptyRows(GaitPDError):
    pass


class ConfigError(GaitPDError):
    pass
