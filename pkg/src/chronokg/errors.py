"""Exception hierarchy shared across pipeline stages."""

from __future__ import annotations


class ChronoKGError(Exception):
    """Base class for all package errors."""


class DomainError(ChronoKGError, ValueError):
    """An input falls outside the domain an operation is defined on."""


class NotFoundError(ChronoKGError, LookupError):
    """A disease, record, or file that was asked for does not exist."""


class TransportError(ChronoKGError):
    """A remote source could not be reached or kept failing after retries."""

    def __init__(self, message: str, *, attempts: int = 0, retry_after: float | None = None):
        super().__init__(message)
        self.attempts = attempts
        self.retry_after = retry_after


class ProviderTimeout(TransportError):
    """A model provider did not answer within its timeout."""


class CacheMissError(ChronoKGError, KeyError):
    """A replay provider has no recorded response for a prompt."""

    def __str__(self) -> str:  # KeyError quotes its arg otherwise
        return str(self.args[0]) if self.args else "cache miss"


class ConfigError(ChronoKGError):
    """The run configuration is missing or invalid."""
