"""Exception types shared across the package."""


class MflError(Exception):
    """Base class for all package errors."""


class InvalidParams(MflError, ValueError):
    """Generator or config parameters are out of their allowed ranges."""


class InvalidInstance(MflError, ValueError):
    """An instance violates a structural invariant (raised at load time)."""


class IneligibleMove(MflError, ValueError):
    """A move would route over an ineligible arc or an ineligible plant."""


class InadmissibleMove(MflError, ValueError):
    """A move would push some level past its open-facility upper bound."""


class ConstructionFailed(MflError, RuntimeError):
    """No feasible initial solution was found within the restart budget."""


class IncompleteMatrix(MflError, ValueError):
    """A result matrix has missing cells or too few rows/columns."""


class LengthMismatch(MflError, ValueError):
    """Paired samples passed to a test do not have matching usable lengths."""


class UnsupportedLevelCount(MflError, ValueError):
    """Only 4- and 5-level problems are supported."""
