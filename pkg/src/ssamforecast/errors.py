"""Exception hierarchy shared by every stage of the pipeline."""


class ForecastError(Exception):
    """Base class for all errors raised by this package."""


class DataError(ForecastError, ValueError):
    """Input data is malformed or unsuitable."""


class FormatError(DataError):
    """CSV header or layout does not match the expected format."""


class RowError(DataError):
    """A data row could not be parsed or failed validation."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyInputError(DataError):
    pass


class DegenerateScalerError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class ShapeError(ForecastError, ValueError):
    pass


class NumericalError(ForecastError, ArithmeticError):
    """Training produced a non-finite loss."""


class ModelStoreError(ForecastError):
    pass


class BundleParseError(ModelStoreError):
    pass


class VersionError(ModelStoreError):
    pass


class CorruptionError(ModelStoreError):
    pass
