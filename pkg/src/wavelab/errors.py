"""Exception types raised across the package."""


class WavelabError(Exception):
    """Base class for all package errors."""


class DomainError(WavelabError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ContractViolation(WavelabError, ValueError):
    """Inputs violate a structural contract (shapes, missing traces, ...)."""


class PreconditionError(WavelabError, ValueError):
    pass


class ConfigError(WavelabError, ValueError):
    """Invalid run configuration. ``field`` names the offending entry."""

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class UnstableRunError(WavelabError, RuntimeError):
    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite values detected at step {step}")


class IndeterminateOrderError(WavelabError, ArithmeticError):
    pass


class ConsistencyError(WavelabError, AssertionError):
    """An identity that must hold algebraically failed numerically."""


class RecorderError(WavelabError, RuntimeError):
    def __init__(self, name, step, cause):
        self.name = name
        self.step = step
        super().__init__(f"recorder {name!r} failed at step {step}: {cause}")
