"""Exception hierarchy shared by every module."""


class EntropyError(Exception):
    """Base class for all toolkit errors."""


class DomainError(EntropyError, ValueError):
    """A point lies outside the space it was declared on."""


class ArgumentError(EntropyError, ValueError):
    pass


class ConfigurationError(EntropyError, ValueError):
    """Scale or net requested below what the space can resolve."""


class SizeError(EntropyError):
    """Instance too large for an exact method."""


class InstanceError(EntropyError):
    """Finite instance cannot satisfy the requested covering constraint."""


class BracketError(EntropyError):
    """Critical-exponent bracket could not be established."""


class UnknownEntryError(EntropyError, KeyError):
    pass


class SolverError(EntropyError):
    pass
