"""Integration cells and quadrature points for classified elements.

Two schemes are provided for trimmed elements:

``baseline``
    triangulation: type A -> 2 straight + 1 curved triangle, type B -> 1 + 1,
    type C -> 1 curved triangle.
``improved``
    direct maps from the unit square: type A is cut into a rectangle and a
    curved quadrilateral, type B is a single curved quadrilateral and type C
    a single curved triangle.

All local coordinates (X, Y) are relative to a box mapped onto [0, 1]^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ClassificationError, DegenerateCellError, InvertedCellError
from .spline_core import NurbsSurface, QuadratureConfig, curve_eval, gauss_1d, triangle_rule
from .trim_model import EDGE_CORNERS, ElementType, TrimmedElement, TrimmedSurface, split_points

SCHEMES = ("baseline", "improved")

# sign of det d(X,Y)/d(u,zeta) for the direct form of each curved-quad case
_CASE_SIGN = {"a": 1.0, "b": 1.0, "c": -1.0, "d": -1.0}


@dataclass(frozen=True)
class LocalCurveSegment:
    """Trim piece ``u in [u1, u2]`` expressed in the local coordinates of ``box``."""

    curve: object
    u1: float
    u2: float
    box: tuple[float, float, float, float]

    def __post_init__(self):
        if not self.u2 > self.u1:
            raise ValueError("segment needs u2 > u1")

    def _wrap(self, u):
        a, b = self.curve.domain
        if self.curve.is_closed:
            return a + np.mod(np.asarray(u, dtype=float) - a, b - a)
        return np.clip(u, a, b)

    def phi(self, u):
        """Local point and u-derivative, each (M, 2)."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        D = curve_eval(self.curve, self._wrap(u), 1)
        s0, s1, t0, t1 = self.box
        scale = np.array([s1 - s0, t1 - t0])
        return (D[:, 0] - [s0, t0]) / scale, D[:, 1] / scale


def map_curved_quad(seg: LocalCurveSegment, case: str, orientation: str, u, zeta):
    """Map (u, zeta) to the curved quadrilateral of the given layout.

    ``case``: a = curve on top, b = bottom, c = right, d = left. ``orientation``
    picks the form whose straight edge starts at the u1 crossing (``direct``)
    or at the u2 crossing (``reversed``). Returns local points (M, 2) and
    Jacobians (M, 2, 2) with rows (X, Y) and columns (u, zeta).
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    z = np.broadcast_to(np.asarray(zeta, dtype=float), u.shape)
    phi, dphi = seg.phi(u)
    fx, fy = phi[:, 0], phi[:, 1]
    dfx, dfy = dphi[:, 0], dphi[:, 1]
    du = seg.u2 - seg.u1
    if orientation == "direct":
        tau, dtau = (u - seg.u1) / du, 1.0 / du
    elif orientation == "reversed":
        tau, dtau = (seg.u2 - u) / du, -1.0 / du
    else:
        raise ValueError(f"unknown orientation {orientation!r}")
    J = np.empty(u.shape + (2, 2))
    one = np.ones_like(z)
    if case == "a":
        X = fx * z + tau * (1 - z)
        Y = fy * z
        J[:, 0, 0] = dfx * z + dtau * (1 - z)
        J[:, 0, 1] = fx - tau
        J[:, 1, 0] = dfy * z
        J[:, 1, 1] = fy
    elif case == "b":
        X = fx * (1 - z) + tau * z
        Y = fy * (1 - z) + z
        J[:, 0, 0] = dfx * (1 - z) + dtau * z
        J[:, 0, 1] = tau - fx
        J[:, 1, 0] = dfy * (1 - z)
        J[:, 1, 1] = one - fy
    elif case == "c":
        X = fx * z
        Y = fy * z + tau * (1 - z)
        J[:, 0, 0] = dfx * z
        J[:, 0, 1] = fx
        J[:, 1, 0] = dfy * z + dtau * (1 - z)
        J[:, 1, 1] = fy - tau
    elif case == "d":
        X = fx * (1 - z) + z
        Y = fy * (1 - z) + tau * z
        J[:, 0, 0] = dfx * (1 - z)
        J[:, 0, 1] = one - fx
        J[:, 1, 0] = dfy * (1 - z) + dtau * z
        J[:, 1, 1] = tau - fy
    else:
        raise ValueError(f"unknown curved-quad case {case!r}")
    return np.stack([X, Y], axis=-1), J


def curved_quad_sign(case: str, orientation: str) -> float:
    return _CASE_SIGN[case] * (1.0 if orientation == "direct" else -1.0)


def map_curved_triangle(V, seg: LocalCurveSegment, u, zeta):
    """Collapse map ``(1 - zeta) V + zeta phi(u)``; the zeta = 0 edge shrinks to V."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    z = np.broadcast_to(np.asarray(zeta, dtype=float), u.shape)
    V = np.asarray(V, dtype=float)
    phi, dphi = seg.phi(u)
    if np.any(np.linalg.norm(phi - V, axis=1) <= 1e-12):
        raise DegenerateCellError("curve meets the collapse vertex", seg.box)
    P = (1 - z)[:, None] * V + z[:, None] * phi
    J = np.empty(u.shape + (2, 2))
    J[:, :, 0] = z[:, None] * dphi
    J[:, :, 1] = phi - V
    return P, J


@dataclass(frozen=True)
class IntegrationCell:
    """One integrable piece of an element.

    ``kind`` is ``rect`` (payload: local bounds X0, X1, Y0, Y1), ``tri``
    (payload: three local vertices), ``ctri`` (payload: vertex V and segment)
    or ``cquad`` (payload: segment, case, orientation). Local coordinates refer
    to ``box`` (the element cell, or a sub-box for split type A pieces).
    """

    kind: str
    box: tuple[float, float, float, float]
    element: int
    rect: tuple | None = None
    vertices: tuple | None = None
    seg: LocalCurveSegment | None = None
    case: str | None = None
    orientation: str | None = None

    def npoints(self, cfg: QuadratureConfig) -> int:
        return cfg.n if self.kind == "tri" else cfg.m


def _local(el: TrimmedElement, p):
    s0, s1, t0, t1 = el.cell
    return ((p[0] - s0) / (s1 - s0), (p[1] - t0) / (t1 - t0))


_LOCAL_CORNERS = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))


def _segment(ts: TrimmedSurface, el: TrimmedElement, box=None) -> LocalCurveSegment:
    u1, u2 = el.window
    return LocalCurveSegment(ts.trims[el.curve], u1, u2, el.cell if box is None else box)


def _u_ordered(ts, el):
    """Crossing records ordered (at u1, at u2)."""
    r1, r2 = el.intersections
    u1 = el.window[0]
    d1 = abs(_wrapdiff(ts, el, r1.u, u1))
    d2 = abs(_wrapdiff(ts, el, r2.u, u1))
    return (r1, r2) if d1 <= d2 else (r2, r1)


def _wrapdiff(ts, el, u, ref):
    c = ts.trims[el.curve]
    if not c.is_closed:
        return u - ref
    a, b = c.domain
    per = b - a
    return (u - ref + 0.5 * per) % per - 0.5 * per


def split_type_a(ts: TrimmedSurface, el: TrimmedElement, index: int = 0):
    """Cut a type A element at P_a into (Rectangle, CurvedQuad)."""
    if el.kind is not ElementType.A:
        raise ClassificationError("split_type_a needs a type A element")
    r1, r2 = el.intersections
    if r1.edge == r2.edge:
        raise ClassificationError("type A crossings on the same edge")
    pa, _ = split_points(el)
    s0, s1, t0, t1 = el.cell
    tc = el.corners[el.trimmed_corner]
    if pa.edge in ("top", "bottom"):
        cut = pa.point[0]
        if tc[0] > cut:
            rect_box, quad_box = (s0, cut, t0, t1), (cut, s1, t0, t1)
        else:
            rect_box, quad_box = (cut, s1, t0, t1), (s0, cut, t0, t1)
    else:
        cut = pa.point[1]
        if tc[1] > cut:
            rect_box, quad_box = (s0, s1, t0, cut), (s0, s1, cut, t1)
        else:
            rect_box, quad_box = (s0, s1, cut, t1), (s0, s1, t0, cut)
    case = {"top": "a", "bottom": "b", "right": "c", "left": "d"}[pa.edge]
    seg = _segment(ts, el, quad_box)
    orientation = _orientation(seg, case)
    rect = IntegrationCell("rect", rect_box, index, rect=(0.0, 1.0, 0.0, 1.0))
    quad = IntegrationCell("cquad", quad_box, index, seg=seg, case=case, orientation=orientation)
    return rect, quad


def _orientation(seg: LocalCurveSegment, case: str) -> str:
    (p1, p2), _ = seg.phi(np.array([seg.u1, seg.u2]))
    axis = 0 if case in ("a", "b") else 1
    return "direct" if p1[axis] < p2[axis] else "reversed"


def improved_cells(ts: TrimmedSurface, el: TrimmedElement, index: int = 0) -> list[IntegrationCell]:
    if el.kind is ElementType.A:
        return list(split_type_a(ts, el, index))
    if el.kind is ElementType.B:
        seg = _segment(ts, el)
        return [IntegrationCell("cquad", el.cell, index, seg=seg, case=el.case, orientation=el.orientation)]
    if el.kind is ElementType.C:
        V = _LOCAL_CORNERS[el.kept_corner]
        return [IntegrationCell("ctri", el.cell, index, vertices=(V,), seg=_segment(ts, el))]
    raise ClassificationError(f"no trimmed-cell rule for {el.kind.value} elements")


def _corner_on_edge(el, edge, keep=True):
    i, j = EDGE_CORNERS[edge]
    for k in (i, j):
        if el.kept[k] == keep:
            return k
    raise ClassificationError("edge has no corner of the requested state")


def triangulate_baseline(ts: TrimmedSurface, el: TrimmedElement, index: int = 0) -> list[IntegrationCell]:
    """Split a trimmed element into straight triangles plus one curved triangle."""
    seg = _segment(ts, el)
    box = el.cell
    if el.kind is ElementType.C:
        V = _LOCAL_CORNERS[el.kept_corner]
        return [IntegrationCell("ctri", box, index, vertices=(V,), seg=seg)]
    r1, r2 = _u_ordered(ts, el)
    p1, p2 = _local(el, r1.point), _local(el, r2.point)
    if el.kind is ElementType.B:
        k1 = _corner_on_edge(el, r1.edge)
        k2 = _corner_on_edge(el, r2.edge)
        V, W = _LOCAL_CORNERS[k1], _LOCAL_CORNERS[k2]
        return [
            IntegrationCell("tri", box, index, vertices=(V, W, p2)),
            IntegrationCell("ctri", box, index, vertices=(V,), seg=seg),
        ]
    if el.kind is ElementType.A:
        t = el.trimmed_corner
        apex = _LOCAL_CORNERS[(t + 2) % 4]
        k1 = _corner_on_edge(el, r1.edge)
        k2 = _corner_on_edge(el, r2.edge)
        return [
            IntegrationCell("tri", box, index, vertices=(apex, _LOCAL_CORNERS[k1], p1)),
            IntegrationCell("ctri", box, index, vertices=(apex,), seg=seg),
            IntegrationCell("tri", box, index, vertices=(apex, p2, _LOCAL_CORNERS[k2])),
        ]
    raise ClassificationError(f"no trimmed-cell rule for {el.kind.value} elements")


def element_cells(ts, el, scheme: str, index: int = 0) -> list[IntegrationCell]:
    if el.kind is ElementType.UNTRIMMED:
        return [IntegrationCell("rect", el.cell, index, rect=(0.0, 1.0, 0.0, 1.0))]
    if el.kind is ElementType.OUTSIDE:
        return []
    if scheme == "improved":
        return improved_cells(ts, el, index)
    if scheme == "baseline":
        return triangulate_baseline(ts, el, index)
    raise ValueError(f"unknown scheme {scheme!r}")


KIND_CODES = {"rect": 0, "tri": 1, "ctri": 2, "cquad": 3}
KIND_NAMES = {v: k for k, v in KIND_CODES.items()}


@dataclass
class QuadraturePoints:
    """Struct-of-arrays quadrature: parameters (s, t) and total weights ``w``.

    ``w`` already contains the Gauss weight and the Jacobians of the cell map,
    of the box scaling and of the surface map, so ``sum(w * f)`` integrates
    over the physical domain. ``cell`` indexes the integration cell,
    ``element`` the parent element, ``kind`` the cell kind code.
    """

    s: np.ndarray
    t: np.ndarray
    w: np.ndarray
    cell: np.ndarray
    element: np.ndarray
    kind: np.ndarray

    def __len__(self):
        return len(self.w)

    @classmethod
    def concat(cls, parts):
        parts = list(parts)
        if not parts:
            z = np.zeros(0)
            zi = np.zeros(0, dtype=int)
            return cls(z, z, z, zi, zi, zi)
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in ("s", "t", "w", "cell", "element", "kind")))

    def subset(self, mask):
        return QuadraturePoints(self.s[mask], self.t[mask], self.w[mask], self.cell[mask], self.element[mask], self.kind[mask])


def _tensor(q):
    x, w = gauss_1d(q)
    X, Z = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    return X.ravel(), Z.ravel(), W.ravel()


def cell_local_points(cell: IntegrationCell, cfg: QuadratureConfig):
    """Local points (M, 2) and weights (M,) including the cell-map Jacobian."""
    if cell.kind == "rect":
        X0, X1, Y0, Y1 = cell.rect
        a, b, w = _tensor(cfg.q)
        return np.stack([X0 + (X1 - X0) * a, Y0 + (Y1 - Y0) * b], -1), w * (X1 - X0) * (Y1 - Y0)
    if cell.kind == "tri":
        nodes, w = triangle_rule(cfg.n)
        P0, P1, P2 = (np.asarray(v, dtype=float) for v in cell.vertices)
        A = np.stack([P1 - P0, P2 - P0], axis=1)
        det = np.linalg.det(A)
        if abs(det) <= 1e-15:
            raise InvertedCellError("degenerate straight triangle", cell.box)
        return P0 + nodes @ A.T, w * abs(det)
    a, z, w = _tensor(cfg.q)
    seg = cell.seg
    u = seg.u1 + (seg.u2 - seg.u1) * a
    w = w * (seg.u2 - seg.u1)
    if cell.kind == "cquad":
        P, J = map_curved_quad(seg, cell.case, cell.orientation, u, z)
        det = np.linalg.det(J) * curved_quad_sign(cell.case, cell.orientation)
        if np.any(det <= 0):
            raise InvertedCellError(f"curved quad ({cell.case}, {cell.orientation}) folds over", cell.box)
        return P, w * det
    if cell.kind == "ctri":
        P, J = map_curved_triangle(cell.vertices[0], seg, u, z)
        det = np.linalg.det(J)
        if not (np.all(det > 0) or np.all(det < 0)):
            raise InvertedCellError("curved triangle folds over", cell.box)
        return P, w * np.abs(det)
    raise ValueError(f"unknown cell kind {cell.kind!r}")


def emit_points(cells, cfg: QuadratureConfig, S: NurbsSurface) -> QuadraturePoints:
    """Quadrature points of many cells in physical-area weights."""
    s_all, t_all, w_all, cid, eid, kind = [], [], [], [], [], []
    for ci, cell in enumerate(cells):
        P, w = cell_local_points(cell, cfg)
        s0, s1, t0, t1 = cell.box
        s_all.append(s0 + (s1 - s0) * P[:, 0])
        t_all.append(t0 + (t1 - t0) * P[:, 1])
        w_all.append(w * (s1 - s0) * (t1 - t0))
        cid.append(np.full(len(w), ci))
        eid.append(np.full(len(w), cell.element))
        kind.append(np.full(len(w), KIND_CODES[cell.kind]))
    if not cells:
        return QuadraturePoints.concat([])
    s = np.concatenate(s_all)
    t = np.concatenate(t_all)
    w = np.concatenate(w_all)
    _, J = S(s, t, 1)
    detS = np.abs(np.linalg.det(J))
    if np.any(detS <= 0):
        raise InvertedCellError("surface Jacobian vanishes at a quadrature point")
    return QuadraturePoints(s, t, w * detS, np.concatenate(cid), np.concatenate(eid), np.concatenate(kind))


def generate(ts: TrimmedSurface, elements, scheme: str, cfg: QuadratureConfig = QuadratureConfig()):
    """All integration cells and quadrature points of a classified domain."""
    cells = []
    for i, el in enumerate(elements):
        cells.extend(element_cells(ts, el, scheme, i))
    return cells, emit_points(cells, cfg, ts.surface)


def count_points(counts, cfg: QuadratureConfig = QuadratureConfig(), method: str = "improved"):
    """Predicted (cells, points) on trimmed elements for per-type tallies (a, b, c)."""
    a, b, c = counts
    n, m = cfg.n, cfg.m
    if method == "baseline":
        return 3 * a + 2 * b + c, (2 * n + m) * a + (n + m) * b + m * c
    if method == "improved":
        return 2 * a + b + c, 2 * m * a + m * b + m * c
    raise ValueError(f"unknown method {method!r}")


def write_point_dump(fh, points: QuadraturePoints, scheme: str, header: bool = True):
    """Delimiter-separated dump: element, scheme, kind, s, t, w_total."""
    if header:
        fh.write("element,scheme,kind,s,t,w_total\n")
    for e, k, s, t, w in zip(points.element, points.kind, points.s, points.t, points.w):
        fh.write(f"{e},{scheme},{KIND_NAMES[int(k)]},{s:.17g},{t:.17g},{w:.17g}\n")


def read_point_dump(fh):
    """Inverse of :func:`write_point_dump`; returns (scheme, QuadraturePoints)."""
    header = fh.readline().strip().split(",")
    if header != ["element", "scheme", "kind", "s", "t", "w_total"]:
        raise ValueError(f"unexpected point-dump header {header}")
    rows = [line.strip().split(",") for line in fh if line.strip()]
    schemes = {r[1] for r in rows}
    el = np.array([int(r[0]) for r in rows], dtype=int)
    kind = np.array([KIND_CODES[r[2]] for r in rows], dtype=int)
    s, t, w = (np.array([float(r[i]) for r in rows]) for i in (3, 4, 5))
    scheme = schemes.pop() if len(schemes) == 1 else None
    return scheme, QuadraturePoints(s, t, w, np.full(len(w), -1), el, kind)
