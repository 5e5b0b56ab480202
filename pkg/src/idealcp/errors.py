"""Exception types raised across the package."""


class IdealCPError(Exception):
    """Base class for all package errors."""


class InvalidIndex(IdealCPError, ValueError):
    pass


class ShapeError(IdealCPError, ValueError):
    pass


class DuplicateIndex(IdealCPError, ValueError):
    pass


class NotNonnegative(IdealCPError, ValueError):
    pass


class ParseError(IdealCPError, ValueError):
    """Malformed input file; ``lineno`` is 1-based when known."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class DimensionTooLarge(IdealCPError, ValueError):
    pass


class InvalidDegree(IdealCPError, ValueError):
    pass


class LevelTooLow(IdealCPError, ValueError):
    pass


class UncoveredPositiveEntry(IdealCPError, ValueError):
    """A positive entry whose index set lies in no maximal clique."""

    def __init__(self, uncovered):
        self.uncovered = list(uncovered)
        super().__init__(f"{len(self.uncovered)} positive entries not covered by any clique, "
                         f"first {self.uncovered[0]}")


class ExtractionFailed(IdealCPError, RuntimeError):
    pass
