"""Exception hierarchy shared by the library and the CLI."""


class CaplsError(Exception):
    """Base class for every error raised by capls_da."""

    exit_code = 1


class InputError(CaplsError, ValueError):
    """Bad input data, flags or files."""

    exit_code = 2


class NumericalError(CaplsError, ArithmeticError):
    """The numerical core could not produce a valid answer."""

    exit_code = 3


class DimensionMismatch(InputError):
    pass


class KTooLarge(InputError):
    pass


class ZeroVector(InputError):
    pass


class ConfigError(InputError):
    pass


class ParseError(InputError):
    def __init__(self, path: str, line: int, detail: str) -> None:
        super().__init__(f"{path}:{line}: {detail}")
        self.path = path
        self.line = line


class RowCountMismatch(InputError):
    pass


class NonFiniteValue(InputError):
    def __init__(self, row: int, col: int, source: str = "features") -> None:
        super().__init__(f"Non-finite value in {source} at row {row}, column {col}.")
        self.row = row
        self.col = col


class LengthMismatch(InputError):
    pass


class LabelOutOfRange(InputError):
    pass


class EmptyTrainingSet(InputError):
    pass


class EmptyClass(InputError):
    pass


class EmptyTestClass(InputError):
    pass


class InsufficientClassSize(InputError):
    pass


class UnknownClassInTargetTrain(InputError):
    pass


class IoError(InputError, OSError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class NonConvergence(NumericalError):
    pass


class DegenerateData(NumericalError):
    pass


class DegenerateClassMean(NumericalError):
    pass
