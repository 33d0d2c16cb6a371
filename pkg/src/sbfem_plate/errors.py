"""Exception hierarchy. Each class maps onto one CLI exit code."""


class PlateError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(PlateError, ValueError):
    """Invalid user input: orders, geometry, boundary letters, config keys."""

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class MaterialError(PlateError, ValueError):
    """Non-physical material data (for example nu outside (-1, 0.5))."""


class DomainError(PlateError, ValueError):
    """A coordinate outside the plate."""


class GeometryError(PlateError):
    """Degenerate element mapping (non-positive Jacobian)."""


class NumericalError(PlateError, ArithmeticError):
    """Eigensolver failure, excessive stiffness asymmetry, no buckling load."""
