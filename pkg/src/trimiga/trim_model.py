"""Trimmed-domain model: grid intersections, inside tests and element classification.

The kept region lies to the LEFT of each trimming curve's direction of travel.
A point is kept when it is kept with respect to every trim.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import (
    ClassificationError,
    GeometryError,
    OnBoundaryError,
    RefinementExhausted,
    TangencyError,
)
from .spline_core import NurbsCurve, NurbsSurface, curve_eval

EDGES = ("bottom", "right", "top", "left")
# corners: 0=(s0,t0) 1=(s1,t0) 2=(s1,t1) 3=(s0,t1)
EDGE_CORNERS = {"bottom": (0, 1), "right": (1, 2), "top": (2, 3), "left": (3, 0)}
OPPOSITE = {"bottom": "top", "top": "bottom", "left": "right", "right": "left"}

ON_CURVE_TOL = 1e-12
_SAMPLES_PER_SPAN = 65


class ElementType(str, enum.Enum):
    UNTRIMMED = "untrimmed"
    OUTSIDE = "outside"
    A = "A"
    B = "B"
    C = "C"
    COMPLEX = "complex"

    @property
    def is_trimmed(self) -> bool:
        return self in (ElementType.A, ElementType.B, ElementType.C)


@dataclass(frozen=True)
class IntersectionRecord:
    """Crossing of trim ``curve`` with the grid line ``coord[axis] == line``.

    ``axis`` 0 is a line of constant s, 1 a line of constant t. ``edge`` is set
    once the record is attached to a particular cell.
    """

    curve: int
    u: float
    point: tuple[float, float]
    axis: int
    line: float
    edge: str | None = None


class _CurveCache:
    """Dense samples of one trim, shared by root finding and inside tests."""

    def __init__(self, curve: NurbsCurve):
        self.curve = curve
        brk = curve.kv.breakpoints()
        us = [np.linspace(a, b, _SAMPLES_PER_SPAN)[:-1] for a, b in zip(brk[:-1], brk[1:])]
        self.u = np.concatenate(us + [brk[-1:]])
        self.P = curve_eval(curve, self.u)[:, 0, :]
        self.closed = curve.is_closed
        a, b = curve.domain
        self.a, self.b = a, b
        if self.closed:
            x, y = self.P[:, 0], self.P[:, 1]
            self.orientation = 1.0 if np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]) > 0 else -1.0
        else:
            self.orientation = 0.0

    def wrap(self, u):
        if not self.closed:
            return np.clip(u, self.a, self.b)
        return self.a + np.mod(np.asarray(u) - self.a, self.b - self.a)


@dataclass(frozen=True, eq=False)
class TrimmedSurface:
    """NURBS surface plus ordered trimming curves in its parameter plane."""

    surface: NurbsSurface
    trims: tuple = ()
    validate: bool = True
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "trims", tuple(self.trims))
        if self.validate:
            self._check()

    def curve_cache(self, ci: int) -> _CurveCache:
        key = ("curve", ci)
        if key not in self._cache:
            self._cache[key] = _CurveCache(self.trims[ci])
        return self._cache[key]

    @property
    def box(self):
        return self.surface.param_box

    def _check(self):
        s0, s1, t0, t1 = self.box
        scale = max(s1 - s0, t1 - t0)
        for ci, c in enumerate(self.trims):
            if c.is_closed:
                continue
            for end in (c.points[0], c.points[-1]):
                d = min(abs(end[0] - s0), abs(end[0] - s1), abs(end[1] - t0), abs(end[1] - t1))
                if d > 1e-10 * scale:
                    raise GeometryError(
                        f"open trim {ci} must start and end on the parameter-rectangle boundary"
                    )
        for i in range(len(self.trims)):
            for j in range(i + 1, len(self.trims)):
                Pi = self.curve_cache(i).P
                Pj = self.curve_cache(j).P
                d = np.sqrt(((Pi[:, None, :] - Pj[None, :, :]) ** 2).sum(-1)).min()
                if d < 1e-6 * scale:
                    raise GeometryError(f"trims {i} and {j} intersect or touch")


# ---------------------------------------------------------------- intersections


def _coord(curve, axis, value):
    def f(u):
        return curve_eval(curve, u)[0, axis] - value

    return f


def _line_roots(ts: TrimmedSurface, ci: int, axis: int, value: float) -> list[float]:
    cc = ts.curve_cache(ci)
    curve = cc.curve
    u, P = cc.u, cc.P
    g = P[:, axis] - value
    n = len(u)
    span = cc.b - cc.a
    roots = []
    f = _coord(curve, axis, value)
    zero = g == 0.0
    if not cc.closed:
        # open trims end on the rectangle boundary; snap endpoint round-off
        zero[[0, -1]] |= np.abs(g[[0, -1]]) <= 1e-13 * max(1.0, abs(value))
    g = np.where(zero, 0.0, g)
    for i in np.nonzero(g[:-1] * g[1:] < 0)[0]:
        roots.append(brentq(f, u[i], u[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    for i in np.nonzero(zero)[0]:
        if cc.closed and i == n - 1:
            continue
        if cc.closed:
            prev, nxt = g[i - 1 if i > 0 else n - 2], g[i + 1]
        else:
            prev = g[i - 1] if i > 0 else None
            nxt = g[i + 1] if i < n - 1 else None
        if prev is None or nxt is None or prev * nxt < 0:
            roots.append(float(u[i]))
        else:
            raise TangencyError(f"trim {ci} touches line {'st'[axis]}={value} at u={u[i]}")
    # near misses: local minima of |g| that do not change sign
    ag = np.abs(g)
    for i in range(1, n - 1):
        if ag[i] <= ag[i - 1] and ag[i] <= ag[i + 1] and g[i - 1] * g[i] > 0 and g[i] * g[i + 1] > 0:
            res = minimize_scalar(
                lambda x: abs(f(x)), bounds=(u[i - 1], u[i + 1]), method="bounded",
                options={"xatol": 1e-14 * span},
            )
            if res.fun < 1e-9:
                raise TangencyError(
                    f"trim {ci} grazes line {'st'[axis]}={value} near u={res.x:.12g}"
                )
    for r in roots:
        d = curve_eval(curve, r, 1)[1, axis]
        if abs(d) * span < 1e-8:
            raise TangencyError(f"trim {ci} tangent to line {'st'[axis]}={value} at u={r:.12g}")
    return sorted(roots)


def line_records(ts: TrimmedSurface, axis: int, value: float) -> list[IntersectionRecord]:
    """All crossings of every trim with the full grid line ``coord[axis] == value`` (cached)."""
    key = ("line", axis, float(value))
    if key not in ts._cache:
        recs = []
        for ci, c in enumerate(ts.trims):
            for r in _line_roots(ts, ci, axis, value):
                p = curve_eval(c, r)[0]
                recs.append(IntersectionRecord(ci, float(r), (float(p[0]), float(p[1])), axis, float(value)))
        ts._cache[key] = recs
    return ts._cache[key]


def grid_lines(surface: NurbsSurface):
    return surface.kv_s.breakpoints(), surface.kv_t.breakpoints()


def curve_grid_intersections(ts: TrimmedSurface, grid=None, max_intersections: int = 64):
    """Crossings of every trim with every grid line, sorted by (curve, parameter).

    ``grid`` is ``(s_lines, t_lines)``; defaults to the surface knot lines.
    ``max_intersections`` bounds the crossings of one curve with one line.
    """
    s_lines, t_lines = grid if grid is not None else grid_lines(ts.surface)
    out = []
    for axis, lines, other in ((0, s_lines, t_lines), (1, t_lines, s_lines)):
        for v in lines:
            recs = line_records(ts, axis, v)
            for ci in range(len(ts.trims)):
                if sum(r.curve == ci for r in recs) > max_intersections:
                    raise GeometryError(f"trim {ci} crosses line {'st'[axis]}={v} too often")
            for r in recs:
                w = r.point[1 - axis]
                if np.min(np.abs(np.asarray(other) - w)) <= 1e-12:
                    raise TangencyError(f"trim {r.curve} passes through grid node {r.point}")
            out.extend(recs)
    out.sort(key=lambda r: (r.curve, r.u, r.axis))
    return out


# ---------------------------------------------------------------- inside tests


def _project(cc: _CurveCache, pts: np.ndarray):
    """Foot parameter, distance and signed side (+ left) of each point."""
    A, B = cc.P[:-1], cc.P[1:]
    AB = B - A
    L2 = np.maximum((AB**2).sum(1), 1e-300)
    u0 = np.empty(len(pts))
    for lo in range(0, len(pts), 1024):
        p = pts[lo : lo + 1024]
        tt = np.clip(((p[:, None, :] - A[None]) * AB[None]).sum(-1) / L2, 0.0, 1.0)
        d2 = ((A[None] + tt[..., None] * AB[None] - p[:, None, :]) ** 2).sum(-1)
        k = d2.argmin(1)
        kk = np.arange(len(p))
        u0[lo : lo + 1024] = cc.u[k] + tt[kk, k] * (cc.u[k + 1] - cc.u[k])
    u = u0
    for _ in range(8):
        D = curve_eval(cc.curve, cc.wrap(u), 2)
        r = D[:, 0] - pts
        F = (r * D[:, 1]).sum(1)
        dF = (D[:, 1] ** 2).sum(1) + (r * D[:, 2]).sum(1)
        step = np.where(dF > 0, F / np.where(dF > 0, dF, 1.0), 0.0)
        u = cc.wrap(u - step)
    D = curve_eval(cc.curve, u, 1)
    r = pts - D[:, 0]
    dist = np.sqrt((r**2).sum(1))
    side = np.sign(D[:, 1, 0] * r[:, 1] - D[:, 1, 1] * r[:, 0])
    return u, dist, side


def _winding(P: np.ndarray, pts: np.ndarray) -> np.ndarray:
    x0, y0 = P[:-1, 0], P[:-1, 1]
    x1, y1 = P[1:, 0], P[1:, 1]
    wn = np.zeros(len(pts), dtype=int)
    for lo in range(0, len(pts), 1024):
        px = pts[lo : lo + 1024, 0:1]
        py = pts[lo : lo + 1024, 1:2]
        is_left = (x1 - x0) * (py - y0) - (px - x0) * (y1 - y0)
        up = (y0 <= py) & (y1 > py) & (is_left > 0)
        down = (y0 > py) & (y1 <= py) & (is_left < 0)
        wn[lo : lo + 1024] = up.sum(1) - down.sum(1)
    return wn


def classify_points(ts: TrimmedSurface, pts) -> tuple[np.ndarray, np.ndarray]:
    """Kept flags and distance to the nearest trim for many parameter points."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    kept = np.ones(len(pts), dtype=bool)
    dmin = np.full(len(pts), np.inf)
    s0, s1, t0, t1 = ts.box
    near_tol = 1e-3 * max(s1 - s0, t1 - t0)
    for ci in range(len(ts.trims)):
        cc = ts.curve_cache(ci)
        _, dist, side = _project(cc, pts)
        dmin = np.minimum(dmin, dist)
        left = side > 0
        if cc.closed:
            far = dist >= near_tol
            if np.any(far):
                inside = _winding(cc.P, pts[far]) != 0
                left_far = inside if cc.orientation > 0 else ~inside
                left = left.copy()
                left[far] = left_far
        kept &= left
    return kept, dmin


def point_inside(ts: TrimmedSurface, p) -> bool:
    """True when parameter point ``p`` lies in the kept region."""
    kept, d = classify_points(ts, np.asarray(p, dtype=float)[None, :])
    if d[0] < ON_CURVE_TOL:
        raise OnBoundaryError(f"point {tuple(p)} lies on a trimming curve")
    return bool(kept[0])


# ---------------------------------------------------------------- classification


@dataclass(frozen=True)
class TrimmedElement:
    """Classified integration cell (a knot span or a quadtree child of one).

    ``window`` is the trim parameter interval ``(u1, u2)`` of the curve piece
    inside the cell, ``u1 < u2``; for closed curves ``u2`` may exceed the
    curve domain and wraps around.
    """

    cell: tuple[float, float, float, float]
    kind: ElementType
    intersections: tuple = ()
    kept: tuple = (True, True, True, True)
    case: str | None = None
    orientation: str | None = None
    curve: int | None = None
    window: tuple[float, float] | None = None
    parent: tuple[int, int] = (0, 0)
    depth: int = 0

    @property
    def corners(self):
        s0, s1, t0, t1 = self.cell
        return ((s0, t0), (s1, t0), (s1, t1), (s0, t1))

    def record_on(self, edge: str) -> IntersectionRecord:
        for r in self.intersections:
            if r.edge == edge:
                return r
        raise KeyError(edge)

    @property
    def trimmed_corner(self) -> int:
        """Index of the trimmed-away corner of a type A element."""
        return self.kept.index(False)

    @property
    def kept_corner(self) -> int:
        """Index of the only kept corner of a type C element."""
        return self.kept.index(True)


def _b_case(kept) -> str:
    for edge, case in (("bottom", "a"), ("top", "b"), ("left", "c"), ("right", "d")):
        i, j = EDGE_CORNERS[edge]
        if kept[i] and kept[j]:
            return case
    raise ClassificationError("type B element without a kept edge")


def _in_cell(P, cell, tol):
    s0, s1, t0, t1 = cell
    return (P[:, 0] > s0 - tol) & (P[:, 0] < s1 + tol) & (P[:, 1] > t0 - tol) & (P[:, 1] < t1 + tol)


def _window(ts: TrimmedSurface, r1: IntersectionRecord, r2: IntersectionRecord, cell):
    ua, ub = sorted((r1.u, r2.u))
    if ts is None:
        return ua, ub
    cc = ts.curve_cache(r1.curve)
    mid = curve_eval(cc.curve, 0.5 * (ua + ub))[0]
    size = max(cell[1] - cell[0], cell[3] - cell[2])
    if _in_cell(mid[None, :], cell, 1e-12 * size)[0]:
        return ua, ub
    if cc.closed:
        return ub, ua + (cc.b - cc.a)
    raise ClassificationError("curve piece between crossings leaves the cell")


def _window_samples(ts, ci, window, n=33):
    cc = ts.curve_cache(ci)
    u = cc.wrap(np.linspace(window[0], window[1], n))
    return curve_eval(cc.curve, u)[:, 0, :]


def classify_element(cell, records, kept, interior_curve: bool = False, ts: TrimmedSurface | None = None,
                     parent=(0, 0), depth=0) -> TrimmedElement:
    """Classify one cell from the crossings on its edges and its corner flags.

    ``records`` must carry ``edge`` tags; ``kept`` is ordered
    (s0,t0), (s1,t0), (s1,t1), (s0,t1). ``interior_curve`` flags a trim piece
    strictly inside the cell that never reaches its edges.
    """
    kept = tuple(bool(k) for k in kept)
    records = tuple(records)
    nk = sum(kept)
    base = dict(cell=tuple(cell), kept=kept, intersections=records, parent=parent, depth=depth)
    if interior_curve:
        return TrimmedElement(kind=ElementType.COMPLEX, **base)
    if not records:
        if nk == 4:
            return TrimmedElement(kind=ElementType.UNTRIMMED, **base)
        if nk == 0:
            return TrimmedElement(kind=ElementType.OUTSIDE, **base)
        raise ClassificationError(f"cell {cell}: corners disagree but no trim crosses its edges")

    # every edge's crossing parity must match the change of its corner flags
    per_edge = {e: sum(r.edge == e for r in records) for e in EDGES}
    for e, (i, j) in EDGE_CORNERS.items():
        if (per_edge[e] % 2 == 1) != (kept[i] != kept[j]):
            raise ClassificationError(f"cell {cell}: edge {e} parity disagrees with corner flags")

    if len(records) != 2 or max(per_edge.values()) > 1 or records[0].curve != records[1].curve or nk == 0:
        return TrimmedElement(kind=ElementType.COMPLEX, **base)

    e1, e2 = records[0].edge, records[1].edge
    window = _window(ts, records[0], records[1], cell)
    ci = records[0].curve
    if ts is not None:
        size = max(cell[1] - cell[0], cell[3] - cell[2])
        if not np.all(_in_cell(_window_samples(ts, ci, window), cell, 1e-10 * size)):
            return TrimmedElement(kind=ElementType.COMPLEX, **base)
    u1_rec = min(records, key=lambda r: _unwrap(ts, r, window))
    extra = dict(curve=ci, window=window)

    if OPPOSITE[e1] == e2:
        if nk != 2:
            raise ClassificationError(f"cell {cell}: opposite-edge crossings need two kept corners")
        case = _b_case(kept)
        want = "left" if case in ("a", "b") else "bottom"
        orient = "direct" if u1_rec.edge == want else "reversed"
        return TrimmedElement(kind=ElementType.B, case=case, orientation=orient, **extra, **base)
    if nk == 3:
        el = TrimmedElement(kind=ElementType.A, **extra, **base)
        if ts is not None and not _split_ok(ts, el):
            return TrimmedElement(kind=ElementType.COMPLEX, **base)
        return el
    if nk == 1:
        return TrimmedElement(kind=ElementType.C, **extra, **base)
    raise ClassificationError(f"cell {cell}: adjacent-edge crossings with {nk} kept corners")


def _unwrap(ts, rec, window):
    u = rec.u
    if ts is not None and u < window[0] - 1e-14:
        cc = ts.curve_cache(rec.curve)
        u += cc.b - cc.a
    return u


def split_points(el: TrimmedElement):
    """(P_a, P_b) for a type A element: P_b is the crossing nearer the trimmed corner.

    Ties go to the lexicographically smaller edge name for P_a.
    """
    corner = np.array(el.corners[el.trimmed_corner])
    s0, s1, t0, t1 = el.cell
    scale = np.array([s1 - s0, t1 - t0])
    r1, r2 = el.intersections
    d1 = np.linalg.norm((np.array(r1.point) - corner) / scale)
    d2 = np.linalg.norm((np.array(r2.point) - corner) / scale)
    if abs(d1 - d2) <= 1e-12:
        pa, pb = (r1, r2) if r1.edge < r2.edge else (r2, r1)
    elif d1 < d2:
        pa, pb = r2, r1
    else:
        pa, pb = r1, r2
    return pa, pb


def _split_ok(ts, el) -> bool:
    """Rectangle piece of the type A split must be entirely kept."""
    pa, _ = split_points(el)
    P = _window_samples(ts, el.curve, el.window, 65)
    axis = 0 if pa.edge in ("top", "bottom") else 1
    cut = pa.point[axis]
    corner = el.corners[el.trimmed_corner][axis]
    size = el.cell[1] - el.cell[0] if axis == 0 else el.cell[3] - el.cell[2]
    side = np.sign(corner - cut)
    return bool(np.all(side * (P[:, axis] - cut) >= -1e-10 * size))


class _Grid:
    """Per-build cache of corner flags and edge crossings."""

    def __init__(self, ts: TrimmedSurface):
        self.ts = ts
        self.flags = {}
        s0, s1, t0, t1 = ts.box
        self.scale = max(s1 - s0, t1 - t0)

    def corner_flags(self, cells):
        need = []
        for c in cells:
            s0, s1, t0, t1 = c
            for p in ((s0, t0), (s1, t0), (s1, t1), (s0, t1)):
                if p not in self.flags:
                    need.append(p)
        need = list(dict.fromkeys(need))
        if need:
            kept, d = classify_points(self.ts, np.array(need))
            for p, k, dd in zip(need, kept, d):
                if dd < ON_CURVE_TOL:
                    raise TangencyError(f"trim passes through cell corner {p}")
                self.flags[p] = bool(k)

    def records(self, cell):
        s0, s1, t0, t1 = cell
        tol = 1e-12 * self.scale
        out = []
        spec = (
            ("bottom", 1, t0, s0, s1),
            ("top", 1, t1, s0, s1),
            ("left", 0, s0, t0, t1),
            ("right", 0, s1, t0, t1),
        )
        for edge, axis, value, lo, hi in spec:
            for r in line_records(self.ts, axis, value):
                w = r.point[1 - axis]
                if lo - tol <= w <= hi + tol:
                    if w - lo <= tol or hi - w <= tol:
                        raise TangencyError(f"trim {r.curve} passes through cell corner near {r.point}")
                    out.append(IntersectionRecord(r.curve, r.u, r.point, r.axis, r.line, edge))
        out.sort(key=lambda r: (r.curve, r.u))
        return out

    def interior_curve(self, cell, records):
        if records:
            return False
        tol = 1e-12 * self.scale
        s0, s1, t0, t1 = cell
        for ci in range(len(self.ts.trims)):
            P = self.ts.curve_cache(ci).P
            if np.any((P[:, 0] > s0 + tol) & (P[:, 0] < s1 - tol) & (P[:, 1] > t0 + tol) & (P[:, 1] < t1 - tol)):
                return True
        return False


def build_elements(ts: TrimmedSurface, max_depth: int = 6) -> list[TrimmedElement]:
    """Classify every knot-span cell, quadtree-splitting complex cells.

    Returns the leaves in knot-span order (t-major, then s), children in
    bottom-left, bottom-right, top-left, top-right order.
    """
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    grid = _Grid(ts)
    sl, tl = grid_lines(ts.surface)
    cells = [
        ((sl[i], sl[i + 1], tl[j], tl[j + 1]), (i, j))
        for j in range(len(tl) - 1)
        for i in range(len(sl) - 1)
    ]
    grid.corner_flags([c for c, _ in cells])
    out = []
    for cell, parent in cells:
        _classify_rec(grid, cell, parent, 0, max_depth, out)
    return out


def _classify_rec(grid, cell, parent, depth, max_depth, out):
    grid.corner_flags([cell])
    recs = grid.records(cell)
    s0, s1, t0, t1 = cell
    kept = tuple(grid.flags[p] for p in ((s0, t0), (s1, t0), (s1, t1), (s0, t1)))
    el = classify_element(cell, recs, kept, grid.interior_curve(cell, recs), grid.ts, parent, depth)
    if el.kind is not ElementType.COMPLEX:
        out.append(el)
        return
    if depth >= max_depth:
        raise RefinementExhausted(cell, depth)
    sm, tm = 0.5 * (s0 + s1), 0.5 * (t0 + t1)
    for sub in ((s0, sm, t0, tm), (sm, s1, t0, tm), (s0, sm, tm, t1), (sm, s1, tm, t1)):
        _classify_rec(grid, sub, parent, depth + 1, max_depth, out)


def type_counts(elements) -> tuple[int, int, int]:
    a = sum(e.kind is ElementType.A for e in elements)
    b = sum(e.kind is ElementType.B for e in elements)
    c = sum(e.kind is ElementType.C for e in elements)
    return a, b, c


def kept_polygon(ts: TrimmedSurface, el: TrimmedElement, n: int = 129) -> np.ndarray:
    """Polygon approximating the kept part of a classified element (for plots and oracles)."""
    if el.kind is ElementType.UNTRIMMED:
        return np.array(el.corners)
    if el.kind is ElementType.OUTSIDE:
        return np.zeros((0, 2))
    P = _window_samples(ts, el.curve, el.window, n)
    start, end = P[0], P[-1]
    # walk the cell boundary counter-clockwise from the curve end back to its start
    s0, s1, t0, t1 = el.cell

    def perim(p):
        x, y = p
        w, h = s1 - s0, t1 - t0
        if abs(y - t0) <= 1e-9 * h and x < s1:
            return (x - s0) / w
        if abs(x - s1) <= 1e-9 * w and y < t1:
            return 1 + (y - t0) / h
        if abs(y - t1) <= 1e-9 * h and x > s0:
            return 2 + (s1 - x) / w
        return 3 + (t1 - y) / h

    pe, ps = perim(end), perim(start)
    corners = el.corners
    path = [tuple(p) for p in P]
    k = pe
    while True:
        nxt = math.floor(k) + 1
        dist_to_start = (ps - k) % 4
        if dist_to_start < (nxt - k) % 4 or dist_to_start == 0:
            break
        ci = nxt % 4
        path.append(corners[ci])
        k = float(nxt % 4)
    poly = np.array(path)
    # keep-left convention: the kept region is on the left of the curve, so the
    # counter-clockwise boundary walk after the curve end must hit kept corners only
    for c in path[len(P):]:
        if not el.kept[corners.index(c)]:
            raise ClassificationError("kept polygon walked through a trimmed corner")
    return poly
