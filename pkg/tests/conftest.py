import numpy as np
import pytest

from trimiga.bench import load_scenario
from trimiga.spline_core import circle_arc, full_circle, make_uniform_surface
from trimiga.trim_model import TrimmedSurface, build_elements

FAN_R = 0.946
HOLE_R = float(np.sqrt(0.09 + 1 / 36))


def fan_domain(n, radius=FAN_R, degree=2):
    return TrimmedSurface(make_uniform_surface(degree, n, n), [circle_arc((0, 0), radius, 0.0, np.pi / 2)])


def hole_domain(n, degree=2):
    sc = load_scenario("hole")
    return TrimmedSurface(make_uniform_surface(degree, n, n), sc.trims())


def plain_hole(n, radius=0.3, center=(0.5, 0.5)):
    return TrimmedSurface(make_uniform_surface(2, n, n), [full_circle(center, radius, clockwise=True)])


@pytest.fixture(scope="session")
def fan3():
    ts = fan_domain(3)
    return ts, build_elements(ts)


@pytest.fixture(scope="session")
def hole3():
    ts = hole_domain(3)
    return ts, build_elements(ts)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = {}


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion and print it."""

    def report(key, title, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {key}: {title} | {detail}"
        ACCEPTANCE_LINES[key] = line
        capman = request.config.pluginmanager.getplugin("capturemanager")
        with capman.global_and_fixture_disabled():
            print("\n    " + line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k)):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
