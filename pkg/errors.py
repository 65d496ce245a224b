# errors.py


class CosparseError(Exception):
    """Base class for every error raised by the toolkit."""


class InvalidDimensionError(CosparseError, ValueError):
    pass


class InvalidArgumentError(CosparseError, ValueError):
    pass


class IterationBudgetError(CosparseError, RuntimeError):
    pass


class EnumerationBudgetError(CosparseError, RuntimeError):
    pass


class DivergenceError(CosparseError, RuntimeError):
    pass


class NoPositiveRootError(CosparseError, ValueError):
    pass


class InsufficientMeasurementsError(CosparseError, ValueError):
    pass


class ProblemGenerationError(CosparseError, RuntimeError):
    pass
