"""Exception types raised across the package."""


class MFGAError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(MFGAError, ValueError):
    pass


class MissingColumn(MFGAError, KeyError):
    def __init__(self, column, path=None):
        self.column = column
        self.path = path
        where = f" in {path}" if path else ""
        super().__init__(f"column {column!r} not found{where}")

    def __str__(self):
        return self.args[0]


class NonNumericCell(MFGAError, ValueError):
    def __init__(self, row, col, value):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(f"non-numeric value {value!r} at row {row}, column {col!r}")


class EmptyFile(MFGAError, ValueError):
    pass


class MulticlassLabels(MFGAError, ValueError):
    pass


class DegenerateResponse(MFGAError, ValueError):
    pass


class TooFewRows(MFGAError, ValueError):
    pass


class IndexOutOfRange(MFGAError, IndexError):
    pass


class InvalidSimplex(MFGAError, ValueError):
    pass


class SingularSystem(MFGAError, ArithmeticError):
    pass


class NoConvergence(MFGAError, RuntimeError):
    def __init__(self, max_iter, residual):
        self.max_iter = max_iter
        self.residual = residual
        super().__init__(
            f"no convergence after {max_iter} iterations (gradient norm {residual:.3e})"
        )


class Exhausted(MFGAError, ValueError):
    pass


class DegenerateScores(MFGAError, UserWarning):
    """Warning category: all alignment scores are equal."""


class ConfigError(MFGAError, ValueError):
    pass


class ParseError(MFGAError, ValueError):
    def __init__(self, path, reason):
        self.path = path
        super().__init__(f"{path}: {reason}")
