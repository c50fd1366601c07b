"""Exception types shared across the toolkit."""


class DomainError(ValueError):
    """A parameter value lies outside the documented domain of an operation."""


class ShapeError(ValueError):
    """Array lengths or dimensions do not match what an operation requires."""


class InsufficientDataError(DomainError):
    """Too few usable data points to carry out an estimate."""


class AlignmentError(ValueError):
    """Per-sensor datasets do not share the same sample identifiers."""


class StratificationError(ValueError):
    """A class is absent from a training fold of a stratified protocol."""


class ConfigError(Exception):
    """A run configuration or scenario file failed to parse or validate."""


class DataError(Exception):
    """An input file is missing, unreadable or corrupt."""
