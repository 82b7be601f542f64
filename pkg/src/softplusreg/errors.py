"""Exception types.  Each maps onto one CLI exit code."""


class SoftplusError(Exception):
    exit_code = 1


class ParameterError(SoftplusError, ValueError):
    """Invalid distribution or model parameter."""

    exit_code = 2


class DegenerateWeightsError(ParameterError):
    pass


class DimensionError(SoftplusError, ValueError):
    exit_code = 2


class DataError(SoftplusError, ValueError):
    """Malformed or inconsistent input data."""

    exit_code = 2


class NumericalError(SoftplusError, ArithmeticError):
    """The chain produced a non-finite quantity it cannot recover from."""

    exit_code = 3


class SingularPrecisionError(NumericalError):
    pass


class VersionMismatchError(SoftplusError):
    exit_code = 4
