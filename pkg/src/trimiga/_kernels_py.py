"""Pure-Python (numpy) versions of the hot kernels.

These mirror ``_kernels.pyx`` exactly in signature and output, and are used
whenever the compiled module is unavailable.
"""

import numpy as np


def find_spans(knots, degree, u):
    knots = np.asarray(knots, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    n = len(knots) - degree - 1
    span = np.searchsorted(knots, u, side="right") - 1
    return np.clip(span, degree, n - 1).astype(np.intp)


def basis_ders(knots, degree, u, nder):
    """Batched Cox-de Boor values and derivatives.

    Returns ``(spans, ders)`` with ``ders`` shaped ``(len(u), nder + 1, degree + 1)``;
    ``ders[m, k, j]`` is the k-th derivative of basis ``spans[m] - degree + j``.
    """
    knots = np.asarray(knots, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    p = degree
    M = u.shape[0]
    spans = find_spans(knots, p, u)
    ndu = np.zeros((M, p + 1, p + 1))
    left = np.zeros((M, p + 1))
    right = np.zeros((M, p + 1))
    ndu[:, 0, 0] = 1.0
    for j in range(1, p + 1):
        left[:, j] = u - knots[spans + 1 - j]
        right[:, j] = knots[spans + j] - u
        saved = np.zeros(M)
        for r in range(j):
            ndu[:, j, r] = right[:, r + 1] + left[:, j - r]
            temp = ndu[:, r, j - 1] / ndu[:, j, r]
            ndu[:, r, j] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        ndu[:, j, j] = saved

    ders = np.zeros((M, nder + 1, p + 1))
    ders[:, 0, :] = ndu[:, :, p]
    a = np.zeros((M, 2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[:] = 0.0
        a[:, 0, 0] = 1.0
        for k in range(1, nder + 1):
            d = np.zeros(M)
            rk = r - k
            pk = p - k
            if r >= k:
                a[:, s2, 0] = a[:, s1, 0] / ndu[:, pk + 1, rk]
                d = a[:, s2, 0] * ndu[:, rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[:, s2, j] = (a[:, s1, j] - a[:, s1, j - 1]) / ndu[:, pk + 1, rk + j]
                d = d + a[:, s2, j] * ndu[:, rk + j, pk]
            if r <= pk:
                a[:, s2, k] = -a[:, s1, k - 1] / ndu[:, pk + 1, r]
                d = d + a[:, s2, k] * ndu[:, r, pk]
            ders[:, k, r] = d
            s1, s2 = s2, s1
    fac = p
    for k in range(1, nder + 1):
        ders[:, k, :] *= fac
        fac *= p - k
    return spans, ders


def accumulate_system(K, F, idx, vals, grads, w, fvals):
    """Add point contributions ``w * grad_i . grad_j`` to K and ``w * R_i * f`` to F.

    ``idx`` holds equation numbers per point and local function, -1 for
    inactive functions. Points are reduced in order so the result is
    reproducible.
    """
    M, nloc = idx.shape
    wg = grads * w[:, None, None]
    local = np.einsum("mid,mjd->mij", wg, grads)
    rows = np.broadcast_to(idx[:, :, None], (M, nloc, nloc))
    cols = np.broadcast_to(idx[:, None, :], (M, nloc, nloc))
    mask = (rows >= 0) & (cols >= 0)
    np.add.at(K, (rows[mask], cols[mask]), local[mask])
    lf = vals * (w * fvals)[:, None]
    m1 = idx >= 0
    np.add.at(F, idx[m1], lf[m1])
