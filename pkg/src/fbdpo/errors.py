"""Shared exception types."""


class FbdpoError(Exception):
    """Base class for all errors raised by this package."""


class ContextOverflow(FbdpoError):
    """A token sequence does not fit into the model context window."""
