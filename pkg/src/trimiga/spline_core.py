"""B-spline / NURBS evaluation, reference quadrature rules and uniform meshes."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels

__all__ = [
    "KnotVector",
    "NurbsCurve",
    "NurbsSurface",
    "QuadratureConfig",
    "find_span",
    "basis_ders",
    "curve_eval",
    "surface_eval",
    "gauss_1d",
    "triangle_rule",
    "make_uniform_surface",
    "uniform_knots",
    "circle_arc",
    "full_circle",
    "circle_through_angles",
    "line_curve",
]


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Clamped knot vector of a given degree."""

    degree: int
    knots: np.ndarray

    def __post_init__(self):
        kv = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", kv)
        kv.flags.writeable = False
        p = self.degree
        if p < 0:
            raise ValueError("degree must be non-negative")
        if kv.ndim != 1 or kv.size < p + 2:
            raise ValueError(f"need at least degree+2={p + 2} knots, got {kv.size}")
        if np.any(np.diff(kv) < 0):
            raise ValueError("knots must be non-decreasing")
        if np.any(kv[: p + 1] != kv[0]) or np.any(kv[-p - 1 :] != kv[-1]):
            raise ValueError("knot vector must be clamped (end knots repeated degree+1 times)")
        if kv[-1] <= kv[0]:
            raise ValueError("knot vector spans an empty interval")

    @property
    def num_basis(self) -> int:
        return self.knots.size - self.degree - 1

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    def breakpoints(self) -> np.ndarray:
        """Distinct knot values, i.e. the boundaries of the nonempty spans."""
        return np.unique(self.knots)

    def greville(self) -> np.ndarray:
        p = self.degree
        if p == 0:
            return 0.5 * (self.knots[:-1] + self.knots[1:])
        kv = self.knots
        return np.array([kv[i + 1 : i + p + 1].mean() for i in range(self.num_basis)])


def uniform_knots(degree: int, num_spans: int, a: float = 0.0, b: float = 1.0) -> KnotVector:
    interior = np.linspace(a, b, num_spans + 1)[1:-1]
    kv = np.concatenate([[a] * (degree + 1), interior, [b] * (degree + 1)])
    return KnotVector(degree, kv)


def _check_param(kv: KnotVector, u):
    a, b = kv.domain
    u = np.asarray(u, dtype=float)
    tol = 1e-12 * max(1.0, abs(b - a))
    if np.any(u < a - tol) or np.any(u > b + tol):
        raise ValueError(f"parameter outside knot range [{a}, {b}]")
    return np.clip(u, a, b)


def find_span(kv: KnotVector, u: float) -> int:
    """Index ``i`` with ``knots[i] <= u < knots[i+1]``; the last knot maps to the last nonempty span."""
    u = _check_param(kv, u)
    return int(kernels.find_spans(kv.knots, kv.degree, np.atleast_1d(u))[0])


def basis_ders(kv: KnotVector, u, k: int = 0):
    """Nonzero basis functions and their derivatives up to order ``k``.

    For scalar ``u`` returns ``(span, table)`` where ``table[j, i]`` is the j-th
    derivative of ``N_{span-p+i}``. For array ``u`` both outputs gain a leading
    point axis.
    """
    p = kv.degree
    if k < 0:
        raise ValueError("derivative order must be non-negative")
    scalar = np.ndim(u) == 0
    uu = np.atleast_1d(_check_param(kv, u))
    kk = min(k, p)
    spans, ders = kernels.basis_ders(kv.knots, p, uu, kk)
    if kk < k:
        ders = np.concatenate([ders, np.zeros((ders.shape[0], k - kk, p + 1))], axis=1)
    if scalar:
        return int(spans[0]), ders[0]
    return spans, ders


def _rational_ders(N: np.ndarray, Pw: np.ndarray, w: np.ndarray, k: int):
    """Quotient-rule derivatives of a rational map.

    ``N``: (M, k+1, nloc) basis derivatives; ``Pw``: (M, nloc, dim) weighted
    control points; ``w``: (M, nloc) weights. Returns (M, k+1, dim).
    """
    A = np.einsum("mki,mid->mkd", N, Pw)
    W = np.einsum("mki,mi->mk", N, w)
    out = np.zeros_like(A)
    from math import comb

    for j in range(k + 1):
        v = A[:, j, :].copy()
        for i in range(1, j + 1):
            v -= comb(j, i) * W[:, i, None] * out[:, j - i, :]
        out[:, j, :] = v / W[:, 0, None]
    return out


@dataclass(frozen=True, eq=False)
class NurbsCurve:
    """Planar NURBS curve; control points live in the surface parameter plane."""

    kv: KnotVector
    points: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        P = np.asarray(self.points, dtype=float)
        w = np.ones(len(P)) if self.weights is None else np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "weights", w)
        if P.ndim != 2 or P.shape[1] != 2:
            raise ValueError("control points must be an (n, 2) array")
        if len(P) != self.kv.num_basis or len(w) != len(P):
            raise ValueError(
                f"expected {self.kv.num_basis} control points/weights, got {len(P)}/{len(w)}"
            )
        if np.any(w <= 0):
            raise ValueError("weights must be positive")

    @property
    def domain(self) -> tuple[float, float]:
        return self.kv.domain

    @property
    def is_closed(self) -> bool:
        return bool(np.linalg.norm(self.points[0] - self.points[-1]) <= 1e-12)

    def reversed(self) -> "NurbsCurve":
        a, b = self.kv.domain
        kv = KnotVector(self.kv.degree, (a + b) - self.kv.knots[::-1])
        return NurbsCurve(kv, self.points[::-1], self.weights[::-1])

    def __call__(self, u, k: int = 0):
        return curve_eval(self, u, k)


def curve_eval(c: NurbsCurve, u, k: int = 0) -> np.ndarray:
    """Point and derivatives of a NURBS curve.

    Returns ``(k+1, 2)`` for scalar ``u`` or ``(M, k+1, 2)`` for arrays; row
    ``j`` is the j-th derivative.
    """
    scalar = np.ndim(u) == 0
    spans, N = basis_ders(c.kv, np.atleast_1d(u), k)
    p = c.kv.degree
    idx = spans[:, None] - p + np.arange(p + 1)[None, :]
    w = c.weights[idx]
    Pw = c.points[idx] * w[..., None]
    out = _rational_ders(N, Pw, w, k)
    return out[0] if scalar else out


@dataclass(frozen=True, eq=False)
class NurbsSurface:
    """Tensor-product NURBS map from the parameter rectangle to the plane.

    ``points`` has shape ``(n_s, n_t, 2)``; index ``i`` runs along s.
    """

    kv_s: KnotVector
    kv_t: KnotVector
    points: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        P = np.asarray(self.points, dtype=float)
        shape = (self.kv_s.num_basis, self.kv_t.num_basis)
        w = np.ones(shape) if self.weights is None else np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "weights", w)
        if P.shape != shape + (2,) or w.shape != shape:
            raise ValueError(f"control net must be {shape + (2,)}, got {P.shape}")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")

    @property
    def param_box(self) -> tuple[float, float, float, float]:
        (s0, s1), (t0, t1) = self.kv_s.domain, self.kv_t.domain
        return s0, s1, t0, t1

    @property
    def num_basis(self) -> int:
        return self.kv_s.num_basis * self.kv_t.num_basis

    def basis(self, s, t):
        """Rational basis values and parametric gradients at many points.

        Returns ``(idx, R, dR)`` with ``idx`` (M, nloc) global basis numbers
        (``i * n_t + j``), ``R`` (M, nloc) and ``dR`` (M, nloc, 2) derivatives
        with respect to (s, t).
        """
        s = np.atleast_1d(np.asarray(s, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        ps, pt = self.kv_s.degree, self.kv_t.degree
        sps, Ns = basis_ders(self.kv_s, s, 1)
        spt, Nt = basis_ders(self.kv_t, t, 1)
        ii = sps[:, None] - ps + np.arange(ps + 1)[None, :]
        jj = spt[:, None] - pt + np.arange(pt + 1)[None, :]
        nt = self.kv_t.num_basis
        idx = (ii[:, :, None] * nt + jj[:, None, :]).reshape(len(s), -1)
        w = self.weights.ravel()[idx]
        B = (Ns[:, 0, :, None] * Nt[:, 0, None, :]).reshape(len(s), -1)
        Bs = (Ns[:, 1, :, None] * Nt[:, 0, None, :]).reshape(len(s), -1)
        Bt = (Ns[:, 0, :, None] * Nt[:, 1, None, :]).reshape(len(s), -1)
        Bw = B * w
        W = Bw.sum(1)
        Ws = (Bs * w).sum(1)
        Wt = (Bt * w).sum(1)
        R = Bw / W[:, None]
        dR = np.empty(R.shape + (2,))
        dR[..., 0] = (Bs * w - R * Ws[:, None]) / W[:, None]
        dR[..., 1] = (Bt * w - R * Wt[:, None]) / W[:, None]
        return idx, R, dR

    def __call__(self, s, t, k: int = 0):
        return surface_eval(self, s, t, k)


def surface_eval(S: NurbsSurface, s, t, k: int = 0):
    """Physical point and, for ``k >= 1``, the Jacobian ``d(x, y)/d(s, t)``.

    Scalar inputs give ``(2,)`` and ``(2, 2)``; arrays add a leading axis.
    """
    scalar = np.ndim(s) == 0 and np.ndim(t) == 0
    s, t = np.broadcast_arrays(np.atleast_1d(s), np.atleast_1d(t))
    _check_param(S.kv_s, s)
    _check_param(S.kv_t, t)
    idx, R, dR = S.basis(s, t)
    P = S.points.reshape(-1, 2)[idx]
    x = np.einsum("mi,mid->md", R, P)
    if k == 0:
        return x[0] if scalar else x
    J = np.einsum("mid,mie->mde", P, dR)
    return (x[0], J[0]) if scalar else (x, J)


@lru_cache(maxsize=None)
def _gauss_cached(q: int):
    x, w = np.polynomial.legendre.leggauss(q)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_1d(q: int):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    if not isinstance(q, (int, np.integer)) or not 1 <= q <= 16:
        raise ValueError(f"unsupported Gauss order {q}; need 1 <= q <= 16")
    return _gauss_cached(int(q))


def _sym_rule(pts, area=0.5):
    """Expand symmetric orbits given as (weight, a, b) barycentric generators."""
    nodes, weights = [], []
    for w, a, b in pts:
        c = 1.0 - a - b
        # key on rounded coordinates: 1 - a - b need not equal a bit for bit
        orbit = {}
        for bary in [(a, b, c), (b, c, a), (c, a, b), (a, c, b), (c, b, a), (b, a, c)]:
            orbit.setdefault(tuple(round(v, 12) for v in bary), bary)
        for key in sorted(orbit):
            nodes.append(orbit[key][:2])
            weights.append(w)
    nodes = np.array(nodes)
    weights = np.array(weights) * area
    return nodes, weights


_TRIANGLE_RULES = {
    1: [(1.0, 1 / 3, 1 / 3)],
    3: [(1 / 3, 1 / 6, 1 / 6)],
    4: [(-27 / 48, 1 / 3, 1 / 3), (25 / 48, 0.2, 0.2)],
    6: [
        (0.223381589678011, 0.445948490915965, 0.445948490915965),
        (0.109951743655322, 0.091576213509771, 0.091576213509771),
    ],
    7: [
        (0.225, 1 / 3, 1 / 3),
        (0.132394152788506, 0.059715871789770, 0.470142064105115),
        (0.125939180544827, 0.797426985353087, 0.101286507323456),
    ],
    12: [
        (0.116786275726379, 0.501426509658179, 0.249286745170910),
        (0.050844906370207, 0.873821971016996, 0.063089014491502),
        (0.082851075618374, 0.053145049844817, 0.310352451033784),
    ],
}


def _dunavant7():
    # closed form of the degree-5 seven point rule
    r15 = np.sqrt(15.0)
    a1 = (6 - r15) / 21
    a2 = (6 + r15) / 21
    w1 = (155 - r15) / 1200
    w2 = (155 + r15) / 1200
    nodes = np.array(
        [
            [1 / 3, 1 / 3],
            [a1, a1], [1 - 2 * a1, a1], [a1, 1 - 2 * a1],
            [a2, a2], [1 - 2 * a2, a2], [a2, 1 - 2 * a2],
        ]
    )
    weights = np.array([9 / 40, w1, w1, w1, w2, w2, w2]) * 0.5
    return nodes, weights


@lru_cache(maxsize=None)
def _triangle_cached(n: int):
    if n == 7:
        nodes, weights = _dunavant7()
    elif n == 4:
        nodes = np.array([[1 / 3, 1 / 3], [0.2, 0.2], [0.6, 0.2], [0.2, 0.6]])
        weights = np.array([-27 / 48, 25 / 48, 25 / 48, 25 / 48]) * 0.5
    else:
        nodes, weights = _sym_rule(_TRIANGLE_RULES[n])
        weights = weights / weights.sum() * 0.5
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def triangle_rule(n: int = 7):
    """Symmetric rule on the reference triangle (0,0),(1,0),(0,1).

    Returns ``(nodes, weights)``; nodes are (x, y), weights sum to 1/2.
    """
    if n not in _TRIANGLE_RULES:
        raise ValueError(f"unsupported triangle rule size {n}; choose from {sorted(_TRIANGLE_RULES)}")
    return _triangle_cached(int(n))


@dataclass(frozen=True)
class QuadratureConfig:
    """``q``: Gauss points per direction on (curved) quads; ``n``: straight-triangle rule size."""

    q: int = 3
    n: int = 7

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.n not in _TRIANGLE_RULES:
            raise ValueError(f"n must be one of {sorted(_TRIANGLE_RULES)}")

    @property
    def m(self) -> int:
        return self.q * self.q


def make_uniform_surface(degree: int, ne_s: int, ne_t: int, extent=(0.0, 1.0, 0.0, 1.0)) -> NurbsSurface:
    """Affine B-spline surface on the unit parameter square with uniform spans.

    Control points sit at the Greville abscissae mapped onto ``extent``
    ``(x0, x1, y0, y1)``, which reproduces the affine map exactly.
    """
    if degree < 1 or ne_s < 1 or ne_t < 1:
        raise ValueError("degree and element counts must be >= 1")
    kv_s = uniform_knots(degree, ne_s)
    kv_t = uniform_knots(degree, ne_t)
    x0, x1, y0, y1 = extent
    gs, gt = kv_s.greville(), kv_t.greville()
    P = np.empty((len(gs), len(gt), 2))
    P[..., 0] = x0 + (x1 - x0) * gs[:, None]
    P[..., 1] = y0 + (y1 - y0) * gt[None, :]
    return NurbsSurface(kv_s, kv_t, P)


def circle_arc(center, radius: float, start: float, sweep: float) -> NurbsCurve:
    """Exact circular arc as a rational quadratic; ``sweep`` in radians, |sweep| <= pi/2 per segment."""
    nseg = max(1, int(np.ceil(abs(sweep) / (np.pi / 2) - 1e-12)))
    dth = sweep / nseg
    c = np.asarray(center, dtype=float)
    wm = np.cos(dth / 2)
    pts, wts = [], []
    for i in range(nseg):
        a0 = start + i * dth
        a1 = a0 + dth
        p0 = c + radius * np.array([np.cos(a0), np.sin(a0)])
        p2 = c + radius * np.array([np.cos(a1), np.sin(a1)])
        am = 0.5 * (a0 + a1)
        p1 = c + radius / wm * np.array([np.cos(am), np.sin(am)])
        if i == 0:
            pts.append(p0)
            wts.append(1.0)
        pts += [p1, p2]
        wts += [wm, 1.0]
    P = np.array(pts)
    # cos(pi/2) and friends: snap round-off so axis-aligned arc ends are exact
    P = np.where(np.abs(P - np.round(P, 14)) < 1e-15, np.round(P, 14), P)
    brk = np.linspace(0.0, 1.0, nseg + 1)
    knots = np.concatenate([[0.0] * 3, np.repeat(brk[1:-1], 2), [1.0] * 3])
    return NurbsCurve(KnotVector(2, knots), P, np.array(wts))


def circle_through_angles(center, radius: float, angles) -> NurbsCurve:
    """Closed circle whose rational-quadratic pieces join at the given angles.

    ``angles`` (radians) must be strictly monotone, spanning less than one
    turn, with consecutive gaps below pi; decreasing angles give a clockwise
    circle. Knot breakpoints are proportional to the swept angle.
    """
    a = np.asarray(angles, dtype=float)
    if len(a) < 3:
        raise ValueError("need at least three seam angles")
    turn = 2 * np.pi if a[1] > a[0] else -2 * np.pi
    full = np.append(a, a[0] + turn)
    sweeps = np.diff(full)
    if np.any(sweeps * np.sign(turn) <= 0) or np.any(np.abs(sweeps) >= np.pi):
        raise ValueError("seam angles must be monotone with gaps in (0, pi)")
    c = np.asarray(center, dtype=float)
    pts, wts = [], []
    for i, (a0, sw) in enumerate(zip(full[:-1], sweeps)):
        wm = np.cos(sw / 2)
        if i == 0:
            pts.append(c + radius * np.array([np.cos(a0), np.sin(a0)]))
            wts.append(1.0)
        am = a0 + sw / 2
        pts.append(c + radius / wm * np.array([np.cos(am), np.sin(am)]))
        pts.append(c + radius * np.array([np.cos(a0 + sw), np.sin(a0 + sw)]))
        wts += [wm, 1.0]
    pts[-1] = pts[0]
    brk = np.concatenate([[0.0], np.cumsum(np.abs(sweeps))]) / (2 * np.pi)
    brk[-1] = 1.0
    knots = np.concatenate([[0.0] * 3, np.repeat(brk[1:-1], 2), [1.0] * 3])
    return NurbsCurve(KnotVector(2, knots), np.array(pts), np.array(wts))


def full_circle(center, radius: float, clockwise: bool = False, start: float = 0.0) -> NurbsCurve:
    """Closed circle from four rational quadratic arcs."""
    sweep = -2 * np.pi if clockwise else 2 * np.pi
    c = circle_arc(center, radius, start, sweep)
    # close exactly
    P = c.points.copy()
    P[-1] = P[0]
    return NurbsCurve(c.kv, P, c.weights)


def line_curve(p0, p1) -> NurbsCurve:
    return NurbsCurve(KnotVector(1, [0.0, 0.0, 1.0, 1.0]), np.array([p0, p1], dtype=float))
