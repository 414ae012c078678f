"""Exception types shared across the package."""


class GamechurnError(Exception):
    """Base class for all package errors."""


class ConfigError(GamechurnError):
    """A configuration document is missing a field or holds an invalid value."""


class SchemaError(GamechurnError):
    """A feature-block schema is malformed or inconsistent with the data."""


class NotPresentError(GamechurnError):
    """A node queried at a timestamp is absent from that snapshot."""


class NoEdgeError(GamechurnError):
    """An edge queried at a timestamp is absent from that snapshot."""


class OutOfRangeError(GamechurnError):
    """A timestamp or index lies outside the observed range."""


class DeadEndError(GamechurnError):
    """A walk transition has no candidate with positive weight."""


class NumericError(GamechurnError):
    """A numeric computation produced a non-finite value."""


class VocabError(GamechurnError):
    """A context-vocabulary index is unknown."""


class EmptyBatchError(GamechurnError):
    """A loss was evaluated on an empty batch."""


class DataError(GamechurnError):
    """Input data violates a precondition of an operation."""


class UndefinedMetricError(GamechurnError):
    """A metric is undefined for the given input (for example single-class AUC)."""


class EmptyInputError(GamechurnError):
    """An aggregate was requested over an empty collection."""
