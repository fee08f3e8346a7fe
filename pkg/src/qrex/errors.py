"""Exception hierarchy shared by every feature module.

Each class carries the CLI exit code it maps to; library code only raises,
``qrex.cli`` does the translation.
"""


class QrexError(Exception):
    exit_code = 2


class ArgumentError(QrexError, ValueError):
    """A precondition of an operation does not hold."""

    exit_code = 2


class StateFormatError(ArgumentError):
    """A state file could not be parsed or has an invalid field."""


class ResourceError(QrexError, RuntimeError):
    """A configured dimension, enumeration or atom cap would be exceeded."""

    exit_code = 3


class EigensolverError(QrexError, RuntimeError):
    exit_code = 3


class BoundViolationError(QrexError, AssertionError):
    """An inequality that must hold failed in a certifying run."""

    exit_code = 1
