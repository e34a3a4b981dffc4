"""Exception hierarchy shared across the package."""


class NgramLPError(Exception):
    """Base class for all package errors."""


class UsageError(NgramLPError, ValueError):
    """An argument violated an operation's precondition."""


class IngestionError(NgramLPError):
    """Raw corpus bytes could not be decoded."""

    def __init__(self, message, byte_offset=None):
        super().__init__(message)
        self.byte_offset = byte_offset


class SplitError(NgramLPError):
    pass


class FoldError(NgramLPError):
    pass


class TrainingError(NgramLPError):
    pass


class SolverError(NgramLPError):
    """The simplex solver hit a numerically singular basis or its iteration cap."""


class WeakModelError(NgramLPError):
    """No weight vector gives every token a positive mixture probability."""


class ExperimentError(NgramLPError):
    def __init__(self, message, fold=None):
        super().__init__(message)
        self.fold = fold
