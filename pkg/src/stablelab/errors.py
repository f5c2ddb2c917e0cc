"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the domain of an operation."""


class CapExceeded(RuntimeError):
    """Stable-set enumeration hit its configured size cap."""

    def __init__(self, cap: int):
        super().__init__(f"stable set exceeds cap of {cap} matchings")
        self.cap = cap


class OracleRefusal(RuntimeError):
    """Brute-force oracle refused an instance above its size bound."""


class InternalError(AssertionError):
    """An internal invariant failed; indicates a bug, not bad input."""
