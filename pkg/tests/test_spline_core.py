import numpy as np
import pytest
from scipy.integrate import dblquad

from trimiga.spline_core import (
    KnotVector,
    NurbsCurve,
    NurbsSurface,
    QuadratureConfig,
    basis_ders,
    circle_arc,
    circle_through_angles,
    curve_eval,
    find_span,
    full_circle,
    gauss_1d,
    line_curve,
    make_uniform_surface,
    surface_eval,
    triangle_rule,
    uniform_knots,
)


def random_kv(rng, degree):
    n_int = rng.integers(0, 6)
    interior = np.sort(rng.random(n_int))
    return KnotVector(degree, np.r_[[0.0] * (degree + 1), interior, [1.0] * (degree + 1)])


class TestKnotVector:
    def test_rejects_unclamped(self):
        with pytest.raises(ValueError):
            KnotVector(2, [0, 0, 0.5, 1, 1, 1])

    def test_rejects_decreasing(self):
        with pytest.raises(ValueError):
            KnotVector(1, [0, 0, 0.6, 0.4, 1, 1])

    def test_rejects_short(self):
        with pytest.raises(ValueError):
            KnotVector(2, [0, 0, 1, 1])

    def test_num_basis(self):
        assert uniform_knots(2, 3).num_basis == 5


class TestFindSpan:
    def test_clamped_cubic_ends(self):
        kv = KnotVector(3, [0, 0, 0, 0, 0.5, 1, 1, 1, 1])
        assert find_span(kv, 0.0) == 3
        assert find_span(kv, 1.0) == 4  # last nonempty span [0.5, 1]

    def test_interior(self):
        kv = uniform_knots(2, 3)
        s = find_span(kv, 0.5)
        assert kv.knots[s] <= 0.5 < kv.knots[s + 1]
        assert kv.knots[s] == pytest.approx(1 / 3)

    @pytest.mark.parametrize("u", [-1e-9, 1.0 + 1e-9, 2.0])
    def test_outside_raises(self, u):
        with pytest.raises(ValueError):
            find_span(uniform_knots(2, 3), u)


class TestBasis:
    def test_linear_hats(self):
        _, N = basis_ders(KnotVector(1, [0, 0, 1, 1]), 0.25, 0)
        assert np.allclose(N[0], [0.75, 0.25])

    def test_partition_of_unity(self, rng):
        for degree in range(1, 5):
            kv = random_kv(rng, degree)
            u = rng.random(1000)
            _, N = basis_ders(kv, u, degree)
            assert np.allclose(N[:, 0].sum(1), 1.0, atol=1e-14)
            for k in range(1, degree + 1):
                assert np.allclose(N[:, k].sum(1), 0.0, atol=1e-9 * np.abs(N[:, k]).max())

    def test_derivative_vs_central_difference(self, rng):
        h = 1e-6
        for degree in range(1, 5):
            kv = uniform_knots(degree, 4)
            u = rng.uniform(0.01, 0.99, 200)
            # keep away from knots so that the stencil stays in one span
            u = u[np.min(np.abs(u[:, None] - kv.breakpoints()[None, :]), 1) > 2 * h]
            sp, N = basis_ders(kv, u, 1)
            sp_p, Np = basis_ders(kv, u + h, 0)
            sp_m, Nm = basis_ders(kv, u - h, 0)
            assert np.all(sp_p == sp) and np.all(sp_m == sp)
            fd = (Np[:, 0] - Nm[:, 0]) / (2 * h)
            assert np.allclose(N[:, 1], fd, rtol=1e-6, atol=1e-6 * np.abs(N[:, 1]).max())

    def test_order_above_degree_is_zero(self):
        _, N = basis_ders(uniform_knots(1, 2), 0.3, 3)
        assert np.all(N[0, 2:] == 0)


class TestCurves:
    def test_quarter_arc_midpoint_on_circle(self):
        c = NurbsCurve(KnotVector(2, [0, 0, 0, 1, 1, 1]), [[1, 0], [1, 1], [0, 1]], [1, np.sqrt(2) / 2, 1])
        p = curve_eval(c, 0.5)[0]
        assert np.linalg.norm(p) == pytest.approx(1.0, abs=1e-12)

    def test_full_circle_on_circle(self):
        c = full_circle((0.3, 0.4), 0.2)
        P = curve_eval(c, np.linspace(0, 1, 501))[:, 0]
        assert np.allclose(np.linalg.norm(P - [0.3, 0.4], axis=1), 0.2, atol=1e-14)
        assert c.is_closed

    def test_circle_through_angles(self):
        ang = np.radians([150.0, 30.0, -30.0, -150.0])
        c = circle_through_angles((0.5, 0.5), 0.3, ang)
        P = curve_eval(c, np.linspace(0, 1, 401))[:, 0]
        assert np.allclose(np.linalg.norm(P - 0.5, axis=1), 0.3, atol=1e-14)
        joints = curve_eval(c, c.kv.breakpoints())[:, 0]
        expect = 0.5 + 0.3 * np.c_[np.cos(ang), np.sin(ang)]
        assert np.allclose(joints[:-1], expect, atol=1e-14)

    def test_circle_through_angles_rejects_wide_gap(self):
        with pytest.raises(ValueError):
            circle_through_angles((0, 0), 1.0, np.radians([0, 10, 200]))

    def test_line_collinear(self, rng):
        c = line_curve((0.1, 0.2), (0.7, 0.9))
        P = curve_eval(c, rng.random(50))[:, 0]
        d = np.array([0.6, 0.7])
        cross = (P[:, 0] - 0.1) * d[1] - (P[:, 1] - 0.2) * d[0]
        assert np.allclose(cross, 0, atol=1e-15)

    def test_derivatives_vs_fd(self, rng):
        c = circle_arc((0.2, 0.1), 0.7, 0.3, 2.0)
        lo, hi = c.domain
        u = rng.uniform(lo + 0.01, hi - 0.01, 100)
        u = u[np.min(np.abs(u[:, None] - c.kv.breakpoints()[None, :]), 1) > 1e-5]
        D = curve_eval(c, u, 2)
        h = 1e-6
        fd1 = (curve_eval(c, u + h)[:, 0] - curve_eval(c, u - h)[:, 0]) / (2 * h)
        fd2 = (curve_eval(c, u + h, 1)[:, 1] - curve_eval(c, u - h, 1)[:, 1]) / (2 * h)
        assert np.allclose(D[:, 1], fd1, rtol=1e-6, atol=1e-6 * np.abs(D[:, 1]).max())
        assert np.allclose(D[:, 2], fd2, rtol=1e-6, atol=1e-6 * np.abs(D[:, 2]).max())

    def test_bad_weights(self):
        with pytest.raises(ValueError):
            NurbsCurve(KnotVector(1, [0, 0, 1, 1]), [[0, 0], [1, 1]], [1, 0])

    def test_reversed(self):
        c = circle_arc((0, 0), 1.0, 0.0, np.pi / 2)
        r = c.reversed()
        assert np.allclose(curve_eval(r, 0.0)[0], [0, 1], atol=1e-15)
        assert np.allclose(curve_eval(r, 0.3)[0], curve_eval(c, 0.7)[0], atol=1e-15)

    def test_outside_domain(self):
        with pytest.raises(ValueError):
            curve_eval(line_curve((0, 0), (1, 1)), 1.5)


class TestSurface:
    def test_identity(self, rng):
        S = make_uniform_surface(2, 3, 3)
        s, t = rng.random(50), rng.random(50)
        x, J = surface_eval(S, s, t, 1)
        assert np.allclose(x, np.c_[s, t], atol=1e-14)
        assert np.allclose(J, np.eye(2), atol=1e-13)

    def test_stretch_det(self, rng):
        S = NurbsSurface(KnotVector(1, [0, 0, 1, 1]), KnotVector(1, [0, 0, 1, 1]),
                         np.array([[[0, 0], [0, 1]], [[2, 0], [2, 1]]], float))
        _, J = surface_eval(S, rng.random(20), rng.random(20), 1)
        assert np.allclose(np.linalg.det(J), 2.0)

    def test_jacobian_vs_fd(self, rng):
        kv = uniform_knots(2, 2)
        P = np.stack(np.meshgrid(kv.greville(), kv.greville(), indexing="ij"), -1)
        P = P + 0.05 * rng.standard_normal(P.shape)
        W = rng.uniform(0.7, 1.4, P.shape[:2])
        S = NurbsSurface(kv, kv, P, W)
        s, t = rng.uniform(0.05, 0.95, (2, 50))
        _, J = surface_eval(S, s, t, 1)
        h = 1e-6
        Js = (surface_eval(S, s + h, t) - surface_eval(S, s - h, t)) / (2 * h)
        Jt = (surface_eval(S, s, t + h) - surface_eval(S, s, t - h)) / (2 * h)
        fd = np.stack([Js, Jt], -1)
        assert np.allclose(J, fd, rtol=1e-6, atol=1e-7)

    def test_mesh_sizes(self):
        S = make_uniform_surface(2, 3, 3)
        assert np.allclose(S.kv_s.breakpoints(), [0, 1 / 3, 2 / 3, 1])
        assert make_uniform_surface(2, 20, 20).points.shape == (22, 22, 2)

    def test_net_shape_checked(self):
        kv = uniform_knots(1, 1)
        with pytest.raises(ValueError):
            NurbsSurface(kv, kv, np.zeros((3, 2, 2)))


class TestGauss:
    def test_q3_closed_form(self):
        x, w = gauss_1d(3)
        assert np.allclose(x, [(1 - np.sqrt(0.6)) / 2, 0.5, (1 + np.sqrt(0.6)) / 2], atol=1e-15)
        assert np.allclose(w, [5 / 18, 8 / 18, 5 / 18], atol=1e-15)

    def test_q1(self):
        x, w = gauss_1d(1)
        assert x[0] == 0.5 and w[0] == 1.0

    @pytest.mark.parametrize("q", range(1, 17))
    def test_exactness(self, q):
        x, w = gauss_1d(q)
        for d in range(2 * q):
            assert abs(np.sum(w * x**d) - 1 / (d + 1)) <= 1e-13

    @pytest.mark.parametrize("q", [0, 17])
    def test_unsupported(self, q):
        with pytest.raises(ValueError):
            gauss_1d(q)


class TestTriangle:
    @pytest.mark.parametrize("n", [1, 3, 4, 6, 7, 12])
    def test_weights_sum(self, n):
        _, w = triangle_rule(n)
        assert np.sum(w) == pytest.approx(0.5, abs=1e-14)

    def test_centroid(self):
        nodes, w = triangle_rule(1)
        assert np.allclose(nodes, [[1 / 3, 1 / 3]]) and w[0] == 0.5

    def test_x2y2_moment(self):
        nodes, w = triangle_rule(7)
        exact, _ = dblquad(lambda y, x: x * x * y * y, 0, 1, 0, lambda x: 1 - x, epsabs=1e-15)
        assert np.sum(w * nodes[:, 0] ** 2 * nodes[:, 1] ** 2) == pytest.approx(exact, abs=1e-15)
        assert exact == pytest.approx(1 / 180, rel=1e-12)

    def test_degree5_exact(self):
        nodes, w = triangle_rule(7)
        from math import factorial

        for i in range(6):
            for j in range(6 - i):
                exact = factorial(i) * factorial(j) / factorial(i + j + 2)
                assert np.sum(w * nodes[:, 0] ** i * nodes[:, 1] ** j) == pytest.approx(exact, abs=1e-15)

    def test_unsupported(self):
        with pytest.raises(ValueError):
            triangle_rule(5)


def test_quadrature_config():
    assert QuadratureConfig().m == 9
    with pytest.raises(ValueError):
        QuadratureConfig(q=0)
    with pytest.raises(ValueError):
        QuadratureConfig(n=5)
