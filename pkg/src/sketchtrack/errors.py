"""Exception types raised across the package."""


class SketchTrackError(ValueError):
    """Base class for all errors raised by sketchtrack."""


class AngleOutOfRange(SketchTrackError):
    pass


class WrongGeometry(SketchTrackError):
    pass


class NotUnitVector(SketchTrackError):
    pass


class GridTooCoarse(SketchTrackError):
    pass


class NonCanonicalGrid(SketchTrackError):
    pass


class EmptyProfile(SketchTrackError):
    pass


class InvalidDim(SketchTrackError):
    pass


class DimMismatch(SketchTrackError):
    pass


class NonpositiveAlpha(SketchTrackError):
    pass


class ConfigInvalid(SketchTrackError):
    pass


class ScaleTooLarge(SketchTrackError):
    pass


class ZeroMatrix(SketchTrackError):
    pass


class NotPSD(SketchTrackError):
    pass


class NotUnitary(SketchTrackError):
    pass


class LengthMismatch(SketchTrackError):
    pass


class DegenerateProfile(SketchTrackError):
    pass


class InvalidQ(SketchTrackError):
    pass


class UnsupportedOperator(SketchTrackError):
    pass


class ConfigParse(SketchTrackError):
    pass


class OutputUnwritable(SketchTrackError):
    pass


class FormatError(SketchTrackError):
    """Malformed binary file."""
