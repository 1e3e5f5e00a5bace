"""Exception hierarchy.

Three families map onto the command-line exit codes: configuration and
shape problems (2), file and format problems (3), numerical failures (4).
"""


class DwlError(Exception):
    """Base class for every error raised by this package."""


# -- configuration / validation (exit code 2) ------------------------------

class ConfigError(DwlError, ValueError):
    """Invalid configuration or argument."""


class BadConfigError(ConfigError):
    pass


class BadShapeError(ConfigError):
    pass


class DimMismatchError(ConfigError):
    pass


class ShapeMismatchError(ConfigError):
    pass


class LengthMismatchError(ConfigError):
    pass


class BadLabelError(ConfigError):
    pass


class BadKError(ConfigError):
    pass


class BadTagError(ConfigError):
    pass


class EmptySplitError(ConfigError):
    pass


class TooSmallError(ConfigError):
    pass


class CenterPlacementFailure(ConfigError):
    pass


# -- input / output (exit code 3) -----------------------------------------

class DataFormatError(DwlError):
    """Malformed input file."""


class ParseError(DataFormatError):
    def __init__(self, line, column, message="cannot parse value"):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class RaggedRowError(DataFormatError):
    pass


class EmptyFileError(DataFormatError):
    pass


# -- numerics (exit code 4) ------------------------------------------------

class NumericalError(DwlError, ArithmeticError):
    """A numerical procedure failed."""


class NotSpdError(NumericalError):
    pass


class RankDeficientError(NumericalError):
    pass


class NoConvergenceError(NumericalError):
    pass


class NotOrthonormalError(NumericalError):
    pass


class NumericalFailureError(NumericalError):
    pass


class NanLossError(NumericalError):
    def __init__(self, epoch, batch):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
