"""Exception hierarchy shared across the engine."""


class QRelaxError(Exception):
    """Base class for all engine errors."""


class SchemaError(QRelaxError):
    """Invalid schema declaration."""


class DataError(QRelaxError):
    """Relation data that cannot be ingested."""


class QueryParseError(QRelaxError):
    """Syntax or well-formedness error in query/rule text."""

    def __init__(self, message: str, pos: int | None = None):
        if pos is not None:
            message = f"{message} (at offset {pos})"
        super().__init__(message)
        self.pos = pos


class TranslationError(QRelaxError):
    """Query cannot be resolved against the loaded schemas."""


class SimilarityError(QRelaxError):
    """Invalid similarity configuration or lookup."""
