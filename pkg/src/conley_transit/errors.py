"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: input errors exit 3, resource and
truncation errors exit 2.
"""

from __future__ import annotations


class ConleyTransitError(Exception):
    """Base class for all library errors."""


class InputError(ConleyTransitError, ValueError):
    """Malformed or inconsistent input data."""


class ResourceError(ConleyTransitError):
    """A configured size cap was exceeded."""


class TruncationError(ResourceError):
    """An operation needs a complete enumeration but got a truncated one."""
