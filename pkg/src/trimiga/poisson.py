"""Poisson problem on a trimmed surface with Lagrange-multiplier Dirichlet data.

Discrete system::

    [K  A^T] [U  ]   [f]
    [A  0  ] [lam] = [b]

with the gradient-form stiffness ``K``, load ``f`` and constraint block
``A_ij = int_dOmega mu_i R_j ds``, ``b_i = int_dOmega mu_i g ds``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import linalg

from . import kernels
from .errors import SolverError
from .quad_gen import QuadraturePoints
from .spline_core import NurbsSurface, basis_ders, curve_eval, gauss_1d, make_uniform_surface
from .trim_model import TrimmedSurface, classify_points, curve_grid_intersections, line_records

__all__ = [
    "ManufacturedProblem",
    "sine_problem",
    "polynomial_problem",
    "DofMap",
    "BoundaryQuadrature",
    "SaddleSystem",
    "boundary_quadrature",
    "assemble_stiffness",
    "assemble_constraints",
    "reduce_constraints",
    "solve_saddle",
    "evaluate",
    "l2_error",
    "condition_number",
    "Solution",
    "solve_poisson",
    "ACTIVE_TOL",
]

ACTIVE_TOL = 1e-14


# ---------------------------------------------------------------- problems


@dataclass(frozen=True)
class ManufacturedProblem:
    """Exact solution with gradient and Laplacian; ``f = -lap u`` and ``g = u``."""

    name: str
    u: Callable
    grad: Callable
    lap: Callable

    def f(self, x, y):
        return -self.lap(x, y)

    def g(self, x, y):
        return self.u(x, y)


def sine_problem(k: float = 1.0) -> ManufacturedProblem:
    """u = sin(k pi x) sin(k pi y)."""
    a = k * np.pi

    def u(x, y):
        return np.sin(a * x) * np.sin(a * y)

    def grad(x, y):
        return np.stack([a * np.cos(a * x) * np.sin(a * y), a * np.sin(a * x) * np.cos(a * y)], -1)

    def lap(x, y):
        return -2 * a * a * u(x, y)

    return ManufacturedProblem("sine" if k == 1.0 else f"sine{k:g}", u, grad, lap)


def polynomial_problem(coeffs, name: str = "poly") -> ManufacturedProblem:
    """u = sum C[i, j] x^i y^j for a coefficient matrix ``C``."""
    C = np.atleast_2d(np.asarray(coeffs, dtype=float))
    Cx = npoly.polyder(C, axis=0)
    Cy = npoly.polyder(C, axis=1)
    Cxx = npoly.polyder(C, 2, axis=0)
    Cyy = npoly.polyder(C, 2, axis=1)

    def u(x, y):
        return npoly.polyval2d(x, y, C)

    def grad(x, y):
        return np.stack([npoly.polyval2d(x, y, Cx), npoly.polyval2d(x, y, Cy)], -1)

    def lap(x, y):
        return npoly.polyval2d(x, y, Cxx) + npoly.polyval2d(x, y, Cyy)

    return ManufacturedProblem(name, u, grad, lap)


# ---------------------------------------------------------------- dofs


@dataclass
class DofMap:
    """Surface basis number <-> equation number for active functions."""

    num_basis: int
    active: np.ndarray  # basis numbers of active functions, ascending

    def __post_init__(self):
        self.active = np.asarray(self.active, dtype=int)
        self.eq = np.full(self.num_basis, -1, dtype=int)
        self.eq[self.active] = np.arange(len(self.active))

    @property
    def size(self) -> int:
        return len(self.active)

    @classmethod
    def from_points(cls, S: NurbsSurface, pts: QuadraturePoints, tol: float = ACTIVE_TOL):
        idx, R, _ = S.basis(pts.s, pts.t)
        hit = np.zeros(S.num_basis, dtype=bool)
        hit[idx[R > tol]] = True
        return cls(S.num_basis, np.flatnonzero(hit))

    def expand(self, U: np.ndarray) -> np.ndarray:
        """Coefficients for every surface basis function (zeros when inactive)."""
        full = np.zeros(self.num_basis)
        full[self.active] = U
        return full


# ---------------------------------------------------------------- geometry helpers


def _physical(S: NurbsSurface, s, t):
    x, J = S(s, t, 1)
    det = np.linalg.det(J)
    if np.any(np.abs(det) <= 1e-14):
        raise SolverError("surface Jacobian is singular at a quadrature point")
    return x, J


def assemble_stiffness(ts: TrimmedSurface, pts: QuadraturePoints, problem: ManufacturedProblem | None,
                       dofs: DofMap | None = None):
    """Stiffness ``K_ij = sum_q grad R_i . grad R_j w_q`` and load ``f_i = sum_q R_i f w_q``."""
    S = ts.surface
    if dofs is None:
        dofs = DofMap.from_points(S, pts)
    idx, R, dR = S.basis(pts.s, pts.t)
    x, J = _physical(S, pts.s, pts.t)
    Jinv = np.linalg.inv(J)
    # physical gradient: dR/dx = dR/d(s,t) . d(s,t)/dx
    grads = np.einsum("mia,mab->mib", dR, Jinv)
    fvals = problem.f(x[:, 0], x[:, 1]) if problem is not None else np.zeros(len(pts))
    n = dofs.size
    K = np.zeros((n, n))
    F = np.zeros(n)
    kernels.accumulate_system(K, F, np.ascontiguousarray(dofs.eq[idx]), np.ascontiguousarray(R),
                              np.ascontiguousarray(grads), np.ascontiguousarray(pts.w),
                              np.ascontiguousarray(fvals, dtype=float))
    return K, F


# ---------------------------------------------------------------- boundary


@dataclass
class BoundaryQuadrature:
    """Points on the boundary of the kept region.

    ``piece`` numbers the boundary piece: trims first (index = trim number),
    then rectangle edges. ``u`` is the piece's own parameter (curve parameter
    or edge coordinate); ``w`` includes the arc-length measure.
    """

    s: np.ndarray
    t: np.ndarray
    w: np.ndarray
    piece: np.ndarray
    u: np.ndarray
    edges: list = field(default_factory=list)  # (axis, value) per edge piece

    def __len__(self):
        return len(self.w)


def _gauss_on(breaks, q):
    x, w = gauss_1d(q)
    a, b = breaks[:-1], breaks[1:]
    keep = b - a > 1e-14
    a, b = a[keep], b[keep]
    u = (a[:, None] + (b - a)[:, None] * x[None, :]).ravel()
    wu = ((b - a)[:, None] * w[None, :]).ravel()
    return u, wu


def boundary_quadrature(ts: TrimmedSurface, q: int = 4) -> BoundaryQuadrature:
    """Gauss points per trim knot span, split again at grid crossings, plus kept edge segments."""
    S = ts.surface
    s0, s1, t0, t1 = ts.box
    recs = curve_grid_intersections(ts)
    parts = []
    for ci, c in enumerate(ts.trims):
        u_lo, u_hi = c.domain
        brk = [c.kv.breakpoints(), [r.u for r in recs if r.curve == ci], [u_lo, u_hi]]
        brk = np.unique(np.clip(np.concatenate(brk), u_lo, u_hi))
        u, wu = _gauss_on(brk, q)
        D = curve_eval(c, u, 1)
        _, J = _physical(S, D[:, 0, 0], D[:, 0, 1])
        tang = np.einsum("mab,mb->ma", J, D[:, 1])
        parts.append((D[:, 0, 0], D[:, 0, 1], wu * np.linalg.norm(tang, axis=1), np.full(len(u), ci), u))

    edges = [(1, t0), (0, s1), (1, t1), (0, s0)]
    piece = len(ts.trims)
    for axis, value in edges:
        kv = S.kv_t if axis == 0 else S.kv_s
        lo, hi = kv.domain
        cuts = [r.point[1 - axis] for r in line_records(ts, axis, value)]
        brk = np.unique(np.clip(np.concatenate([kv.breakpoints(), cuts]), lo, hi))
        mids = 0.5 * (brk[:-1] + brk[1:])
        P = np.empty((len(mids), 2))
        P[:, axis] = value
        P[:, 1 - axis] = mids
        kept = classify_points(ts, P)[0] if ts.trims else np.ones(len(mids), dtype=bool)
        a, b = brk[:-1][kept], brk[1:][kept]
        xg, wg = gauss_1d(q)
        u = (a[:, None] + (b - a)[:, None] * xg[None, :]).ravel()
        wu = ((b - a)[:, None] * wg[None, :]).ravel()
        st = np.empty((len(u), 2))
        st[:, axis] = value
        st[:, 1 - axis] = u
        if len(u):
            _, J = _physical(S, st[:, 0], st[:, 1])
            wu = wu * np.linalg.norm(J[:, :, 1 - axis], axis=1)
        parts.append((st[:, 0], st[:, 1], wu, np.full(len(u), piece), u))
        piece += 1
    cat = [np.concatenate([p[k] for p in parts]) for k in range(5)]
    return BoundaryQuadrature(cat[0], cat[1], cat[2], cat[3].astype(int), cat[4], edges)


def coarse_space(S: NurbsSurface, factor: int = 2) -> NurbsSurface:
    """Polynomial B-spline space on the same box with ``factor`` times fewer spans."""
    ns = max(1, -(-(len(S.kv_s.breakpoints()) - 1) // factor))
    nt = max(1, -(-(len(S.kv_t.breakpoints()) - 1) // factor))
    return make_uniform_surface(S.kv_s.degree, ns, nt, S.param_box)


def _parse_mode(mode: str):
    if mode in ("curve", "trace"):
        return mode, 1
    if mode.startswith("coarse"):
        return "coarse", int(mode[6:] or 2)
    raise ValueError(f"unknown multiplier space {mode!r}")


def _multiplier_values(ts: TrimmedSurface, bq: BoundaryQuadrature, mode: str):
    """Multiplier numbers and values ``(M, k)`` at boundary points; -1 marks padding.

    Every boundary piece (trim or straight edge) gets its own copy of the
    multiplier functions, so the discrete flux may jump where pieces meet.
    """
    kind, factor = _parse_mode(mode)
    S = ts.surface
    space = coarse_space(S, factor) if kind == "coarse" else S
    nloc = (space.kv_s.degree + 1) * (space.kv_t.degree + 1)
    width = max([nloc] + [c.kv.degree + 1 for c in ts.trims])
    ids = np.full((len(bq), width), -1, dtype=int)
    vals = np.zeros((len(bq), width))
    offset = 0
    for piece in range(len(ts.trims) + len(bq.edges)):
        m = bq.piece == piece
        if kind == "curve" and piece < len(ts.trims):
            c = ts.trims[piece]
            p = c.kv.degree
            spans, N = basis_ders(c.kv, bq.u[m], 0)
            loc = spans[:, None] - p + np.arange(p + 1)[None, :]
            Nw = N[:, 0, :] * c.weights[loc]
            ids[m, : p + 1] = loc + offset
            vals[m, : p + 1] = Nw / Nw.sum(1, keepdims=True)
            offset += c.kv.num_basis
            continue
        if np.any(m):
            idx, R, _ = space.basis(bq.s[m], bq.t[m])
            ids[m, :nloc] = idx + offset
            vals[m, :nloc] = R
        offset += space.num_basis
    return ids, vals, offset


def assemble_constraints(ts: TrimmedSurface, g: Callable | None, dofs: DofMap, bq: int = 4,
                         multipliers: str = "coarse2", quad: BoundaryQuadrature | None = None):
    """Constraint block ``A`` (multipliers x active dofs) and right-hand side ``b``.

    Multiplier spaces, one copy per boundary piece:

    * ``"curve"``: trim-curve NURBS basis on trims, surface trace (the 1D edge
      basis) on straight edges.
    * ``"trace"``: traces of the surface basis functions.
    * ``"coarseK"``: traces of a B-spline space with K times fewer spans.

    Multipliers that never see a boundary point are removed.
    """
    S = ts.surface
    quad = boundary_quadrature(ts, bq) if quad is None else quad
    if len(quad) == 0:
        raise SolverError("boundary quadrature is empty")
    mid, mval, nmult = _multiplier_values(ts, quad, multipliers)
    sidx, R, _ = S.basis(quad.s, quad.t)
    col = dofs.eq[sidx]
    x = S(quad.s, quad.t)
    gv = g(x[:, 0], x[:, 1]) if g is not None else np.zeros(len(quad))
    A = np.zeros((nmult, dofs.size))
    b = np.zeros(nmult)
    for a in range(mid.shape[1]):
        ra = mid[:, a]
        ok = ra >= 0
        np.add.at(b, ra[ok], (mval[:, a] * gv * quad.w)[ok])
        for c in range(sidx.shape[1]):
            cc = col[:, c]
            m2 = ok & (cc >= 0)
            np.add.at(A, (ra[m2], cc[m2]), (mval[:, a] * R[:, c] * quad.w)[m2])
    used = np.zeros(nmult, dtype=bool)
    used[mid[mid >= 0]] = True
    used &= np.abs(A).sum(1) > 0
    if not np.any(used):
        raise SolverError("multiplier space is empty")
    return A[used], b[used]


# ---------------------------------------------------------------- saddle system


@dataclass
class SaddleSystem:
    K: np.ndarray
    A: np.ndarray
    f: np.ndarray
    b: np.ndarray
    U: np.ndarray | None = None
    lam: np.ndarray | None = None
    dropped: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    residual: tuple = (np.nan, np.nan)

    def __post_init__(self):
        n = self.K.shape[0]
        if self.K.shape != (n, n) or self.f.shape != (n,):
            raise SolverError("stiffness and load sizes disagree")
        if self.A.ndim != 2 or self.A.shape[1] != n or self.b.shape != (self.A.shape[0],):
            raise SolverError("constraint block sizes disagree")


def reduce_constraints(A: np.ndarray, tol: float = 1e-10):
    """Rank-revealing (pivoted QR) selection of independent constraint rows.

    Returns ``(keep, dropped)`` row indices, both ascending.
    """
    if A.shape[0] == 0:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    _, Rq, piv = linalg.qr(A.T, mode="economic", pivoting=True)
    d = np.abs(np.diag(Rq))
    rank = int(np.sum(d > tol * d[0])) if d.size and d[0] > 0 else 0
    return np.sort(piv[:rank]), np.sort(piv[rank:])


def _equilibrate(K, A):
    """Diagonal scalings making diag(K) and the rows of A of unit size."""
    dk = np.sqrt(np.abs(np.diag(K)))
    du = 1.0 / np.where(dk > 0, dk, 1.0)
    ra = np.linalg.norm(A * du[None, :], axis=1)
    dl = 1.0 / np.where(ra > 0, ra, 1.0)
    return du, dl


def solve_saddle(sys: SaddleSystem, tol: float = 1e-10, method: str = "nullspace") -> SaddleSystem:
    """Solve the block system; redundant multipliers are dropped and recorded.

    The system is equilibrated first (diagonal of K, rows of A), which leaves
    the solution unchanged. Redundancy is detected by pivoted QR of the
    scaled constraint block.

    ``method="nullspace"`` (default) reuses that QR: the constraints fix the
    range component of U, and the reduced stiffness on the null space of A is
    solved by LU. ``method="lu"`` factors the whole block matrix by LU with
    partial pivoting; it loses accuracy when cut cells leave basis functions
    with tiny support.
    """
    n = sys.K.shape[0]
    du, dl = _equilibrate(sys.K, sys.A)
    As = sys.A * du[None, :] * dl[:, None]
    Ks = sys.K * du[:, None] * du[None, :]
    fs = sys.f * du
    keep, dropped = reduce_constraints(As, tol)
    As, bs = As[keep], sys.b[keep] * dl[keep]
    m = len(keep)
    try:
        if method == "nullspace":
            Q, R = linalg.qr(As.T)
            Q1, Q2, R1 = Q[:, :m], Q[:, m:], R[:m, :m]
            y1 = linalg.solve_triangular(R1, bs, trans="T")
            Us = Q1 @ y1
            if n > m:
                Kr = Q2.T @ Ks @ Q2
                y2 = linalg.solve(Kr, Q2.T @ (fs - Ks @ Us), assume_a="sym", check_finite=False)
                Us = Us + Q2 @ y2
            ls = linalg.solve_triangular(R1, Q1.T @ (fs - Ks @ Us))
        elif method == "lu":
            M = np.zeros((n + m, n + m))
            M[:n, :n] = Ks
            M[:n, n:] = As.T
            M[n:, :n] = As
            sol = linalg.solve(M, np.concatenate([fs, bs]), check_finite=False)
            Us, ls = sol[:n], sol[n:]
        else:
            raise ValueError(f"unknown method {method!r}")
    except linalg.LinAlgError as exc:
        raise SolverError(f"saddle system is singular: {exc}") from exc
    U = Us * du
    lam = np.zeros(sys.A.shape[0])
    lam[keep] = ls * dl[keep]
    A = sys.A[keep]
    KU = sys.K @ U
    r1 = np.linalg.norm(KU + A.T @ lam[keep] - sys.f) / max(np.linalg.norm(sys.f), np.linalg.norm(KU), 1e-300)
    AU = A @ U
    r2 = np.linalg.norm(AU - sys.b[keep]) / max(np.linalg.norm(sys.b[keep]), np.linalg.norm(AU), 1e-300)
    sys.U, sys.lam, sys.dropped, sys.residual = U, lam, dropped, (float(r1), float(r2))
    return sys


def evaluate(S: NurbsSurface, coeffs_full: np.ndarray, s, t) -> np.ndarray:
    """Discrete field ``sum_i U_i R_i`` at parameter points."""
    idx, R, _ = S.basis(s, t)
    return (R * coeffs_full[idx]).sum(1)


def l2_error(U: np.ndarray, exact: Callable, pts: QuadraturePoints, S: NurbsSurface, dofs: DofMap) -> float:
    """sqrt(sum_q (u_h - u)^2 w_q) over the given points."""
    uh = evaluate(S, dofs.expand(U), pts.s, pts.t)
    x = S(pts.s, pts.t)
    e = uh - exact(x[:, 0], x[:, 1])
    return float(np.sqrt(np.sum(e * e * pts.w)))


def condition_number(K: np.ndarray, rtol: float = 1e-14):
    """2-norm condition number from the SVD, ignoring singular values below ``rtol * sigma_max``.

    Returns ``(cond, n_excluded)``.
    """
    K = np.atleast_2d(K)
    if K.size == 0:
        return 1.0, 0
    sv = linalg.svd(K, compute_uv=False)
    keep = sv > rtol * sv[0]
    return float(sv[0] / sv[keep][-1]), int(np.sum(~keep))


# ---------------------------------------------------------------- driver


@dataclass
class Solution:
    system: SaddleSystem
    dofs: DofMap
    l2: float
    cond: float
    cond_excluded: int
    symmetry: float

    @property
    def coeffs(self):
        return self.dofs.expand(self.system.U)


def solve_poisson(ts: TrimmedSurface, pts: QuadraturePoints, problem: ManufacturedProblem,
                  multipliers: str = "coarse2", bq: int = 4) -> Solution:
    """Assemble, solve and measure one manufactured problem on given domain quadrature."""
    S = ts.surface
    dofs = DofMap.from_points(S, pts)
    K, F = assemble_stiffness(ts, pts, problem, dofs)
    A, b = assemble_constraints(ts, problem.g, dofs, bq, multipliers)
    sys = solve_saddle(SaddleSystem(K, A, F, b))
    cond, excl = condition_number(K)
    sym = float(np.linalg.norm(K - K.T) / max(np.linalg.norm(K), 1e-300))
    return Solution(sys, dofs, l2_error(sys.U, problem.u, pts, S, dofs), cond, excl, sym)
