# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; see ``_kernels_py`` for the reference."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef Py_ssize_t _span(const double[::1] knots, int p, Py_ssize_t n, double u) nogil:
    cdef Py_ssize_t lo, hi, mid
    if u >= knots[n]:
        return n - 1
    if u <= knots[p]:
        lo = p
        while lo + 1 < n and knots[lo + 1] <= u:
            lo += 1
        return lo
    lo = p
    hi = n
    mid = (lo + hi) // 2
    while u < knots[mid] or u >= knots[mid + 1]:
        if u < knots[mid]:
            hi = mid
        else:
            lo = mid
        mid = (lo + hi) // 2
    return mid


def find_spans(knots, int degree, u):
    cdef const double[::1] kv = np.ascontiguousarray(knots, dtype=np.float64)
    cdef const double[::1] uu = np.ascontiguousarray(np.atleast_1d(u), dtype=np.float64)
    cdef Py_ssize_t n = kv.shape[0] - degree - 1
    out = np.empty(uu.shape[0], dtype=np.intp)
    cdef Py_ssize_t[::1] o = out
    cdef Py_ssize_t m
    for m in range(uu.shape[0]):
        o[m] = _span(kv, degree, n, uu[m])
    return out


def basis_ders(knots, int degree, u, int nder):
    cdef const double[::1] kv = np.ascontiguousarray(knots, dtype=np.float64)
    cdef const double[::1] uu = np.ascontiguousarray(np.atleast_1d(u), dtype=np.float64)
    cdef int p = degree
    cdef Py_ssize_t M = uu.shape[0]
    cdef Py_ssize_t n = kv.shape[0] - p - 1
    spans = np.empty(M, dtype=np.intp)
    ders = np.zeros((M, nder + 1, p + 1))
    cdef Py_ssize_t[::1] sp = spans
    cdef double[:, :, ::1] D = ders
    cdef double[:, ::1] ndu = np.zeros((p + 1, p + 1))
    cdef double[::1] left = np.zeros(p + 1)
    cdef double[::1] right = np.zeros(p + 1)
    cdef double[:, ::1] a = np.zeros((2, p + 1))
    cdef Py_ssize_t m, s, j, r, k, j1, j2, rk, pk, s1, s2
    cdef double saved, temp, d, x, fac
    for m in range(M):
        x = uu[m]
        s = _span(kv, p, n, x)
        sp[m] = s
        ndu[0, 0] = 1.0
        for j in range(1, p + 1):
            left[j] = x - kv[s + 1 - j]
            right[j] = kv[s + j] - x
            saved = 0.0
            for r in range(j):
                ndu[j, r] = right[r + 1] + left[j - r]
                temp = ndu[r, j - 1] / ndu[j, r]
                ndu[r, j] = saved + right[r + 1] * temp
                saved = left[j - r] * temp
            ndu[j, j] = saved
        for j in range(p + 1):
            D[m, 0, j] = ndu[j, p]
        for r in range(p + 1):
            s1 = 0
            s2 = 1
            for j in range(p + 1):
                a[0, j] = 0.0
                a[1, j] = 0.0
            a[0, 0] = 1.0
            for k in range(1, nder + 1):
                d = 0.0
                rk = r - k
                pk = p - k
                if r >= k:
                    a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                    d = a[s2, 0] * ndu[rk, pk]
                j1 = 1 if rk >= -1 else -rk
                j2 = k - 1 if r - 1 <= pk else p - r
                for j in range(j1, j2 + 1):
                    a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                    d += a[s2, j] * ndu[rk + j, pk]
                if r <= pk:
                    a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                    d += a[s2, k] * ndu[r, pk]
                D[m, k, r] = d
                s1, s2 = s2, s1
        fac = p
        for k in range(1, nder + 1):
            for j in range(p + 1):
                D[m, k, j] *= fac
            fac *= p - k
    return spans, ders


def accumulate_system(double[:, ::1] K, double[::1] F, const Py_ssize_t[:, ::1] idx,
                      const double[:, ::1] vals, const double[:, :, ::1] grads,
                      const double[::1] w, const double[::1] fvals):
    cdef Py_ssize_t M = idx.shape[0]
    cdef Py_ssize_t nloc = idx.shape[1]
    cdef Py_ssize_t m, i, j, gi, gj
    cdef double wm, gx, gy
    with nogil:
        for m in range(M):
            wm = w[m]
            for i in range(nloc):
                gi = idx[m, i]
                if gi < 0:
                    continue
                F[gi] += wm * vals[m, i] * fvals[m]
                gx = wm * grads[m, i, 0]
                gy = wm * grads[m, i, 1]
                for j in range(nloc):
                    gj = idx[m, j]
                    if gj < 0:
                        continue
                    K[gi, gj] += gx * grads[m, j, 0] + gy * grads[m, j, 1]
