"""Property-based checks over randomly drawn inputs."""

from math import factorial

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from conftest import fan_domain
from trimiga.errors import TrimigaError
from trimiga.quad_gen import count_points, generate
from trimiga.spline_core import QuadratureConfig, basis_ders, find_span, triangle_rule, uniform_knots
from trimiga.trim_model import build_elements, type_counts

EXACTNESS = {1: 1, 3: 2, 4: 3, 6: 4, 7: 5}


@given(
    p=st.integers(1, 4),
    spans=st.integers(1, 9),
    u=st.floats(0.0, 1.0),
)
def test_partition_of_unity(p, spans, u):
    kv = uniform_knots(p, spans)
    _, table = basis_ders(kv, u, 1)
    assert table[0].sum() == pytest.approx(1.0, abs=1e-13)
    assert table[1].sum() == pytest.approx(0.0, abs=1e-10)
    assert np.all(table[0] >= -1e-15)


@given(spans=st.integers(1, 12), u=st.floats(0.0, 1.0))
def test_span_contains_parameter(spans, u):
    kv = uniform_knots(2, spans)
    k = find_span(kv, u)
    assert kv.knots[k] <= u <= kv.knots[k + 1]


@given(n=st.sampled_from(sorted(EXACTNESS)), data=st.data())
def test_triangle_rule_exactness(n, data):
    i = data.draw(st.integers(0, EXACTNESS[n]))
    j = data.draw(st.integers(0, EXACTNESS[n] - i))
    x, w = triangle_rule(n)
    got = np.sum(w * x[:, 0] ** i * x[:, 1] ** j)
    assert got == pytest.approx(factorial(i) * factorial(j) / factorial(i + j + 2), rel=1e-12)


tallies = st.tuples(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))


@given(x=tallies, y=tallies, q=st.integers(1, 6), n=st.sampled_from(sorted(EXACTNESS)),
       method=st.sampled_from(["baseline", "improved"]))
def test_count_points_additive(x, y, q, n, method):
    cfg = QuadratureConfig(q=q, n=n)
    both = tuple(a + b for a, b in zip(x, y))
    cx, px = count_points(x, cfg, method)
    cy, py = count_points(y, cfg, method)
    assert count_points(both, cfg, method) == (cx + cy, px + py)


@given(x=tallies)
def test_improved_never_uses_more_points(x):
    # holds for the default rules: 2m <= 2n + m, m <= n + m, m == m
    assert count_points(x, method="improved")[1] <= count_points(x, method="baseline")[1]


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(radius=st.floats(0.3, 0.99), n=st.integers(2, 8), scheme=st.sampled_from(["baseline", "improved"]))
def test_random_fan_law_and_area(radius, n, scheme):
    ts = fan_domain(n, radius=radius)
    try:
        els = build_elements(ts)
    except TrimigaError:
        assume(False)
    cells, pts = generate(ts, els, scheme)
    trimmed = np.array([e.kind.is_trimmed for e in els])
    ncells = sum(bool(trimmed[cl.element]) for cl in cells)
    npts = int(trimmed[pts.element].sum())
    assert (ncells, npts) == count_points(type_counts(els), method=scheme)
    assert pts.w.sum() == pytest.approx(np.pi * radius**2 / 4, rel=1e-4)
