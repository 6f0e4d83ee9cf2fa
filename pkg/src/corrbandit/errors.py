"""Exception hierarchy shared across the package.

The CLI maps each family to its own exit code, so callers should raise the
most specific class that applies.
"""


class CorrBanditError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(CorrBanditError, ValueError):
    exit_code = 2


class DomainError(CorrBanditError, ValueError):
    """A reward or pseudo-reward fell outside the declared reward domain."""

    exit_code = 4


class UnsupportedDomainError(DomainError):
    """A policy was paired with a reward domain it cannot handle."""


class DegenerateInstanceError(CorrBanditError, ValueError):
    """The bandit instance has no unique optimal arm."""

    exit_code = 4


class IngestError(CorrBanditError, ValueError):
    exit_code = 3
