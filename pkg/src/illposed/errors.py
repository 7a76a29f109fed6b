"""Exception hierarchy shared by all modules."""


class IllPosedError(Exception):
    """Base class for all errors raised by :mod:`illposed`."""


class InvalidArgumentError(IllPosedError, ValueError):
    pass


class SingularOperatorError(IllPosedError):
    """Raised when the operator cannot be inverted numerically."""

    def __init__(self, message, pivot):
        super().__init__(f"{message} (smallest pivot magnitude {pivot:.3e})")
        self.pivot = pivot


class DegenerateWeightError(IllPosedError):
    pass


class DegenerateAtomError(IllPosedError):
    pass


class TruncationLimitError(IllPosedError):
    def __init__(self, message, largest_usable):
        super().__init__(f"{message}; largest usable K is {largest_usable}")
        self.largest_usable = largest_usable


class RankDeficiencyError(IllPosedError):
    def __init__(self, message, rank):
        super().__init__(f"{message}; effective rank {rank}")
        self.rank = rank


class OracleUnavailableError(IllPosedError):
    pass


class CapacityError(IllPosedError):
    pass


class BenchmarkAborted(IllPosedError):
    pass
