"""Exception hierarchy shared by every module.

Each failure class maps to exactly one CLI exit code (see ``cli.EXIT_CODES``).
"""


class ObesityHeuristicError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ObesityHeuristicError, ValueError):
    """Invalid parameters, unknown keys, duplicate registrations."""


class InputError(ObesityHeuristicError):
    """Unreadable or malformed input data."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class StateError(ObesityHeuristicError, RuntimeError):
    """An operation was called on data in the wrong state."""


class RunError(ObesityHeuristicError, RuntimeError):
    """Failure while executing an optimization or cleaning run."""

    def __init__(self, message, genome=None):
        super().__init__(message)
        self.genome = genome
