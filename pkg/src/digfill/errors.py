"""Exception hierarchy. Each family maps onto a CLI exit code."""


class DigfillError(Exception):
    exit_code = 1


class ConfigError(DigfillError, ValueError):
    exit_code = 2


class DataError(DigfillError):
    exit_code = 3


class NumericError(DigfillError, ArithmeticError):
    exit_code = 4


class MissingFile(DataError, FileNotFoundError):
    pass


class TooManyRejected(DataError):
    pass


class NonPositiveCellSize(ConfigError):
    pass


class NonPositiveRadius(ConfigError):
    pass


class DegenerateSplit(DataError):
    pass


class ClusterTooSmall(DataError):
    pass


class NoExcavatorData(DataError):
    pass


class IdMismatch(DataError):
    pass


class TooFewPoints(DataError):
    pass


class NotPositiveDefinite(NumericError):
    pass


class AllStartsFailed(NumericError):
    pass
