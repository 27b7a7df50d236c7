"""Exception hierarchy shared across the package."""


class DedupScanError(Exception):
    """Base class for all errors raised by dedup_scan."""


class InvalidInputError(DedupScanError, ValueError):
    """Caller passed data that violates an operation's preconditions."""


class UnsupportedInputError(DedupScanError, ValueError):
    """Input is well-formed but outside what the operation supports."""


class InvalidStateError(DedupScanError, RuntimeError):
    """Operation invoked on an object that is not in the required state."""


class InvariantError(DedupScanError):
    """An internal consistency check failed; indicates a bug, not bad input."""
