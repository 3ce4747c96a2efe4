"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class ParetoFairError(Exception):
    exit_code = 1


class UsageError(ParetoFairError, ValueError):
    """Bad arguments: wrong dimensions, invalid configuration values."""

    exit_code = 2


class DataError(ParetoFairError, ValueError):
    """Input data that cannot be ingested or does not support the request."""

    exit_code = 3


class ConfigurationError(DataError):
    """A fairness notion needs a group subset that is empty in the data."""


class NumericError(ParetoFairError, ArithmeticError):
    """Non-finite values produced during evaluation or optimization."""

    exit_code = 4
