"""Random curved integration cells with independent boundary descriptions.

Each generator returns ``(cell, pieces)``: an IntegrationCell in a random box
and the counter-clockwise boundary of the same region as tau-pieces on [0, 1]
for :func:`oracles.green_moment`. Curves are rational quadratic Beziers with
the middle weight in [0.7, 1.4] and the middle point at most a quarter cell
away from the chord midpoint.
"""

import numpy as np

from oracles import rational_bezier, segment
from trimiga.quad_gen import IntegrationCell, LocalCurveSegment
from trimiga.spline_core import KnotVector, NurbsCurve

# layout a (straight edge Y = 0, curve between X = 0 and X = 1) carried to each case
LAYOUT = {
    "a": lambda p: p,
    "b": lambda p: np.c_[p[:, 0], 1 - p[:, 1]],
    "c": lambda p: np.c_[p[:, 1], p[:, 0]],
    "d": lambda p: np.c_[1 - p[:, 1], p[:, 0]],
}
# quarter turns about the cell centre; corner 0 = (0, 0) goes to corner k
TURN = [
    lambda p: p,
    lambda p: np.c_[1 - p[:, 1], p[:, 0]],
    lambda p: np.c_[1 - p[:, 0], 1 - p[:, 1]],
    lambda p: np.c_[p[:, 1], 1 - p[:, 0]],
]


def random_box(rng):
    lo = rng.uniform(0.0, 0.5, 2)
    wd = rng.uniform(0.05, 0.5, 2)
    return (lo[0], lo[0] + wd[0], lo[1], lo[1] + wd[1])


def _to_box(box, L):
    return np.c_[box[0] + (box[1] - box[0]) * L[:, 0], box[2] + (box[3] - box[2]) * L[:, 1]]


def _curve(rng, G, w1):
    a = rng.uniform(-1.0, 2.0)
    b = a + rng.uniform(0.3, 2.0)
    return NurbsCurve(KnotVector(2, [a, a, a, b, b, b]), G, [1.0, w1, 1.0]), a, b


def _ccw(pieces, loop):
    # signed area of the loop polygon decides the direction
    x, y = loop[:, 0], loop[:, 1]
    if np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) > 0:
        return pieces
    return [lambda t, f=f: (lambda p, d: (p, -d))(*f(1.0 - t)) for f in reversed(pieces)]


def random_quad(rng, case, orientation):
    y0, y2 = rng.uniform(0.25, 0.85, 2)
    x1 = rng.uniform(0.25, 0.75)
    y1 = np.clip(0.5 * (y0 + y2) + rng.uniform(-0.25, 0.25), 0.1, 0.95)
    w1 = rng.uniform(0.7, 1.4)
    P = LAYOUT[case](np.array([[0.0, y0], [x1, y1], [1.0, y2]]))
    corners = LAYOUT[case](np.array([[1.0, y2], [1.0, 0.0], [0.0, 0.0], [0.0, y0]]))
    axis = 0 if case in "ab" else 1
    L = P if (P[0, axis] < P[2, axis]) == (orientation == "direct") else P[::-1]
    box = random_box(rng)
    curve, a, b = _curve(rng, _to_box(box, L), w1)
    cell = IntegrationCell("cquad", box, 0, seg=LocalCurveSegment(curve, a, b, box), case=case, orientation=orientation)
    Pg, Cg = _to_box(box, P), _to_box(box, corners)
    pieces = [lambda t: rational_bezier(Pg, [1.0, w1, 1.0], t)] + [segment(Cg[i], Cg[i + 1]) for i in range(3)]
    loop = np.vstack([Pg[[0, 2]], Cg[1:]])
    return cell, _ccw(pieces, loop)


def random_triangle(rng, corner=None):
    corner = rng.integers(4) if corner is None else corner
    x0, y0 = rng.uniform(0.3, 1.0, 2)
    mid = np.array([0.5 * x0, 0.5 * y0])
    n = np.array([y0, x0]) / np.hypot(x0, y0)
    P1 = np.clip(mid + n * rng.uniform(-0.2, 0.25), 0.02, 0.98)
    w1 = rng.uniform(0.7, 1.4)
    P = TURN[corner](np.array([[x0, 0.0], P1, [0.0, y0]]))
    V = TURN[corner](np.zeros((1, 2)))[0]
    box = random_box(rng)
    L = P if rng.random() < 0.5 else P[::-1]
    curve, a, b = _curve(rng, _to_box(box, L), w1)
    cell = IntegrationCell("ctri", box, 0, vertices=(tuple(V),), seg=LocalCurveSegment(curve, a, b, box))
    Pg, Vg = _to_box(box, P), _to_box(box, V[None, :])[0]
    pieces = [lambda t: rational_bezier(Pg, [1.0, w1, 1.0], t), segment(Pg[2], Vg), segment(Vg, Pg[0])]
    return cell, _ccw(pieces, np.vstack([Pg[[0, 2]], Vg]))


def random_cells(rng, count):
    """``count`` cells cycling through every quad case/orientation and the triangle."""
    kinds = [(c, o) for c in "abcd" for o in ("direct", "reversed")] + [("tri", None)]
    out = []
    for k in range(count):
        case, orient = kinds[k % len(kinds)]
        out.append(random_triangle(rng) if case == "tri" else random_quad(rng, case, orient))
    return out
