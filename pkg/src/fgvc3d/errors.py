"""Exception hierarchy shared across the package.

Each family maps to one CLI exit code so scripted callers can distinguish
error classes without parsing messages.
"""


class FgvcError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class DataFormatError(FgvcError):
    """An on-disk artifact (PLY, manifest, FGEMB, spec JSON) is ill-formed."""

    exit_code = 3


class BackendProtocolError(FgvcError):
    """An external encoder backend violated the invocation protocol."""

    exit_code = 4

    def __init__(self, message, *, returncode=None, stderr=None):
        super().__init__(message)
        self.returncode = returncode
        self.stderr = stderr


class ValidationError(FgvcError):
    """Inputs violate a documented precondition (shapes, labels, coverage)."""

    exit_code = 5


class GeometryError(FgvcError):
    """Point geometry is too degenerate for the requested operation."""

    exit_code = 6
