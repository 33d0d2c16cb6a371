"""Spectral-element solver for thin and moderately thick plates graded in plane.

The plate stiffness follows from a scaled-boundary treatment of the thickness
direction: the in-plane domain is discretised with high-order GLL spectral
elements while the through-thickness behaviour is integrated in closed form,
so no shear correction factor enters.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    DomainError,
    GeometryError,
    MaterialError,
    NumericalError,
    PlateError,
)
from .material import SI3N4, SUS304, MaterialPair, PhaseProperties  # noqa: E402
from .mesh import BoundarySpec, PlateGeometry, build_mesh  # noqa: E402
from .solver import AnalysisResult, PlateModel  # noqa: E402

__all__ = [
    "AnalysisResult", "BoundarySpec", "ConfigurationError", "DomainError", "GeometryError",
    "MaterialError", "MaterialPair", "NumericalError", "PhaseProperties", "PlateError",
    "PlateGeometry", "PlateModel", "SI3N4", "SUS304", "build_mesh", "__version__",
]
