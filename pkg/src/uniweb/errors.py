"""Exception hierarchy shared across the engine."""


class UniwebError(Exception):
    """Base class for all engine errors."""


class UrlParseError(UniwebError):
    """Raised when a raw URL cannot be parsed into a host."""


class SchemaError(UniwebError):
    """Registry or snapshot file violates the documented schema."""

    def __init__(self, message: str, row: int | None = None, field: str | None = None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if field is not None:
            loc.append(f"field '{field}'")
        suffix = f" ({', '.join(loc)})" if loc else ""
        super().__init__(message + suffix)
        self.row = row
        self.field = field


class ValidationError(UniwebError):
    """Cross-record invariant violated (referential integrity, duplicates...)."""


class ConsistencyError(UniwebError):
    """Inputs disagree with each other (e.g. a stated total != sum of parts)."""


class SourceUnavailableError(UniwebError):
    """Transient measurement-source failure; the campaign runner retries it."""


class SourcePermanentError(UniwebError):
    """Measurement source is gone for good; the campaign aborts resumably."""


class CampaignAbortedError(UniwebError):
    """Campaign stopped mid-wave. Carries completed records for resumption."""

    def __init__(self, message: str, completed: dict | None = None):
        super().__init__(message)
        self.completed = completed or {}
