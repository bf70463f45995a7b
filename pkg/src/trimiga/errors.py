"""Exception types raised by the geometry, quadrature and solver layers."""


class TrimigaError(Exception):
    """Base class for library errors."""


class GeometryError(TrimigaError, ValueError):
    """Trimmed surface violates its structural invariants."""


class TangencyError(GeometryError):
    """A trim touches a grid line or cell corner without crossing it cleanly."""


class OnBoundaryError(GeometryError):
    """Query point lies on a trimming curve."""


class ClassificationError(TrimigaError):
    """Corner flags and intersections of a cell are mutually inconsistent."""


class RefinementExhausted(TrimigaError):
    """A cell is still unclassifiable at the maximum quadtree depth."""

    def __init__(self, cell, depth):
        super().__init__(f"cell {tuple(round(c, 12) for c in cell)} still complex at depth {depth}")
        self.cell = cell
        self.depth = depth


class InvertedCellError(TrimigaError):
    """Mapping Jacobian changes sign or vanishes at a quadrature node."""

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class DegenerateCellError(InvertedCellError):
    """Collapse vertex of a curved triangle coincides with the curve."""


class SolverError(TrimigaError):
    """Linear system could not be set up or solved."""
