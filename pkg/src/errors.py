"""
Error types for tsirelson-norms.
Every failure raised by the library derives from TsirelsonError; warnings
derive from UserWarning so computation can proceed after reporting them.
"""

from typing import Optional


class TsirelsonError(Exception):
    """Base class for library errors."""


class InputError(TsirelsonError):
    """Malformed user input (vectors, sets, specs, report files)."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class CapExceeded(TsirelsonError):
    """An enumeration would exceed the configured support cap."""

    def __init__(self, size: int, cap: int, what: str = "support"):
        self.size = size
        self.cap = cap
        super().__init__(f"{what} size {size} exceeds cap {cap}")


class MalformedPartition(TsirelsonError):
    """Partition blocks overlap, are empty, or are not successive."""


class MalformedDecomposition(TsirelsonError):
    """An average's decomposition is not a successive block sequence."""


class InvalidTree(TsirelsonError):
    """A norming tree fails validation or cannot be evaluated."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class PreconditionFailed(TsirelsonError):
    """An operation's precondition does not hold for its input."""


class NonDyadicCoefficient(TsirelsonError):
    """A coefficient that must be a power of 1/2 is not."""


class SupplyExhausted(TsirelsonError):
    """A vector supply cannot provide the requested block."""


class SchemaMismatch(TsirelsonError):
    """A report does not match the VerifyReport schema."""


class NonRegularSpec(UserWarning):
    """A space spec fails the regularity check up to the tested bound."""


class DivergenceWarning(UserWarning):
    """A finite-horizon sequence does not settle within its horizon."""
