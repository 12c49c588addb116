"""Exception hierarchy shared by every subpackage."""


class SplineGANError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(SplineGANError, ValueError):
    pass


class ConfigError(SplineGANError, ValueError):
    pass


class ContractError(SplineGANError, ValueError):
    pass


class DomainError(SplineGANError, ValueError):
    pass


class NumericsError(SplineGANError, ArithmeticError):
    pass


class CheckpointError(SplineGANError, IOError):
    pass
