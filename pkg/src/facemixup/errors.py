"""Exception hierarchy shared by all modules."""


class FaceMixupError(Exception):
    """Base class for every error raised by this package."""


class MalformedJson(FaceMixupError):
    pass


class WrongPointCount(FaceMixupError):
    pass


class NonFinitePoint(FaceMixupError):
    pass


class DegenerateRegion(FaceMixupError):
    pass


class InvalidImage(FaceMixupError):
    pass


class InsufficientClasses(FaceMixupError):
    pass


class DimensionMismatch(FaceMixupError):
    pass


class RectOutOfBounds(FaceMixupError):
    pass


class SamplingFailure(FaceMixupError):
    pass


class LengthMismatch(FaceMixupError):
    pass


class SameClassPair(FaceMixupError):
    pass


class InvalidWeights(FaceMixupError):
    pass


class EmptyDataset(FaceMixupError):
    pass


class ConfigError(FaceMixupError):
    pass
