"""Exception and warning types."""


class GroupFactError(Exception):
    """Base class for errors raised by groupfact."""


class DomainError(GroupFactError, ValueError):
    """Argument outside the domain of a mathematical function."""


class MomentUndefinedError(DomainError):
    """Requested moment diverges for the given distribution parameters."""


class DataError(GroupFactError, ValueError):
    """Malformed or inconsistent input data."""


class ConfigError(GroupFactError, ValueError):
    """Invalid run configuration."""


class NumericalError(GroupFactError, ArithmeticError):
    """Non-finite quantity produced during inference."""


class EmptyClassWarning(UserWarning):
    """A class has no training frames; its common basis stays at the prior."""
