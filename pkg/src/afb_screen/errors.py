"""Exception types raised across the screening pipeline."""


class AfbError(Exception):
    """Base class for all pipeline errors."""


class MalformedFile(AfbError):
    pass


class UnsupportedFormat(AfbError):
    pass


class DimensionMismatch(AfbError, ValueError):
    pass


class DegenerateMoments(AfbError, ValueError):
    pass


class PlacementFailure(AfbError):
    pass


class StoreUnavailable(AfbError, OSError):
    pass


class ConfigError(AfbError, ValueError):
    """Invalid configuration; carries the offending line number when known."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class InsufficientFields(UserWarning):
    """Issued when a smear is graded from fewer fields than a conclusive grade needs."""
