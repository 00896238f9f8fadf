"""Exception types shared across the package."""


class RiverSeisError(Exception):
    """Base class for all errors raised by this package."""


class InvalidConfigError(RiverSeisError):
    """A parameter or configuration value is outside its valid range."""


class ContractViolationError(RiverSeisError):
    """An operation was called with inputs that violate its contract."""


class NumericalDegeneracyError(RiverSeisError):
    """A geometric or numerical degeneracy prevents a well-defined result."""
