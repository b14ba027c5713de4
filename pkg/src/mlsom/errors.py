"""Exception hierarchy shared by every mlsom module."""


class MlsomError(Exception):
    """Base class for all mlsom errors."""

    exit_code = 1


class ConfigError(MlsomError, ValueError):
    """Invalid hyper-parameters or incompatible shapes in a configuration."""

    exit_code = 2


class DimensionError(MlsomError, ValueError):
    """A vector or array does not have the length the model expects."""

    exit_code = 2


class ScheduleError(MlsomError, ValueError):
    """Learning-rate schedule queried outside its epoch range."""

    exit_code = 2


class DataError(MlsomError):
    """Missing, empty or unusable input data."""

    exit_code = 3


class ParseError(DataError):
    """A binary file does not conform to its format.

    Attributes:
        field: name of the header field or section that failed to parse.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class BadMagicError(ParseError):
    pass


class TruncatedFileError(ParseError):
    pass


class CountMismatchError(ParseError):
    pass


class TrainingError(MlsomError):
    """Numerical failure during optimisation (non-finite loss or weights)."""

    exit_code = 4
