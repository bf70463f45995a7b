"""Isogeometric Poisson solver on trimmed NURBS domains with two trimmed-element quadrature schemes."""

from .errors import (
    ClassificationError,
    DegenerateCellError,
    GeometryError,
    InvertedCellError,
    OnBoundaryError,
    RefinementExhausted,
    SolverError,
    TangencyError,
    TrimigaError,
)
from .kernels import BACKEND

__version__ = "0.1.0"
