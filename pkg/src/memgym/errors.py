"""Exception hierarchy shared across the package.

Each family maps onto a CLI exit code (see ``memgym.cli``).
"""

from __future__ import annotations


class MemGymError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class UsageError(MemGymError):
    exit_code = 2


class StorageError(MemGymError):
    """File could not be read or written."""

    exit_code = 3


class BackendError(MemGymError):
    """A model backend failed after all retries."""

    exit_code = 4

    def __init__(self, message: str, tag: str | None = None):
        super().__init__(message if tag is None else f"[{tag}] {message}")
        self.tag = tag


class TransientBackendError(BackendError):
    """Retryable transport failure (timeouts, 5xx, rate limits)."""


class NonRetryableBackendError(BackendError):
    """Auth / 4xx class failure; retrying will not help."""


class JSONExtractionError(BackendError):
    """No parsable JSON in a completion. ``raw`` keeps the text for re-asks."""

    def __init__(self, message: str, raw: str, tag: str | None = None):
        super().__init__(message, tag)
        self.raw = raw


class TemplateError(MemGymError):
    exit_code = 5

    def __init__(self, slot: str):
        super().__init__(f"unfilled template slot: {slot}")
        self.slot = slot


class ValidationError(MemGymError):
    exit_code = 5


class IntegrityError(ValidationError):
    """A state assignment does not cover what a question requires."""


class RangeError(ValidationError):
    pass


class GenerationError(ValidationError):
    """The blueprint pipeline could not produce a valid artifact."""


class AssemblyError(ValidationError):
    def __init__(self, violations: list[str]):
        super().__init__("blueprint failed validation:\n  " + "\n  ".join(violations))
        self.violations = violations


class CompatibilityError(ValidationError):
    """Two artifacts (trace, blueprint, replay) do not belong together."""


class UndefinedScoreError(ValidationError):
    pass


class SessionError(MemGymError):
    def __init__(self, message: str, partial: list | None = None):
        super().__init__(message)
        self.partial = partial or []
