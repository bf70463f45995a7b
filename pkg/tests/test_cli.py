import io
import subprocess
import sys

import numpy as np
import pytest
from click.testing import CliRunner

from trimiga.bench import (
    ScenarioError,
    format_report,
    load_scenario,
    parse_expectations,
    parse_mesh,
    parse_report,
    parse_scenario,
    run_scenario,
    verify,
)
from trimiga.cli import main
from trimiga.quad_gen import read_point_dump

EXPECT_3 = """[counts]
mesh scheme te cells points
3x3 improved 5 5 45
3x3 baseline 5 9 73
[checks]
improved.l2@3x3 <= baseline.l2@3x3
improved.cond@3x3 <= baseline.cond@3x3
"""


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args):
    return runner.invoke(main, list(args), catch_exceptions=False)


def test_run_and_verify(runner, tmp_path):
    exp = tmp_path / "exp.txt"
    exp.write_text(EXPECT_3)
    out = tmp_path / "out"
    res = invoke(runner, "run", "--scenario", "fan", "--mesh", "3x3", "--out", str(out), "--expect", str(exp))
    assert res.exit_code == 0, res.output
    assert "PASS" in res.output
    for name in ("report.txt", "timing.txt", "points_3x3_improved.csv", "points_3x3_baseline.csv",
                 "solution_3x3_improved.csv"):
        assert (out / name).is_file()
    res = invoke(runner, "verify", "--report", str(out / "report.txt"), "--expect", str(exp))
    assert res.exit_code == 0 and res.output.strip().endswith("PASS")


def test_perturbed_expectation_fails(runner, tmp_path):
    exp = tmp_path / "exp.txt"
    exp.write_text(EXPECT_3.replace("5 5 45", "5 5 46"))
    res = invoke(runner, "run", "--scenario", "fan", "--mesh", "3x3", "--expect", str(exp))
    assert res.exit_code == 1
    assert "expected (5, 5, 46), got (5, 5, 45) (points 46 -> 45)" in res.output
    assert res.output.strip().endswith("FAIL")


def test_missing_row_fails(runner, tmp_path):
    res = invoke(runner, "run", "--scenario", "fan", "--mesh", "3x3", "--expect", "fan")
    assert res.exit_code == 1
    assert "FAIL counts 10x10" in res.output or "FAIL missing row 10x10" in res.output


@pytest.mark.parametrize(
    "args",
    [
        ["run", "--scenario", "fan", "--mesh", "3by3"],
        ["run", "--scenario", "no-such-scenario"],
        ["run", "--scenario", "fan", "--scheme", "fancy"],
        ["run", "--scenario", "fan", "--degree", "7"],
        ["dump-points", "--scenario", "fan", "--mesh", "3x3", "--mesh", "5x5"],
        ["verify", "--report", "/nonexistent/report.txt", "--expect", "fan"],
    ],
)
def test_bad_input_exit_2(runner, args):
    assert invoke(runner, *args).exit_code == 2


def test_bad_expectations_exit_2(runner, tmp_path):
    exp = tmp_path / "exp.txt"
    exp.write_text("[counts]\n3x3 improved five 5 45\n")
    res = invoke(runner, "run", "--scenario", "fan", "--mesh", "3x3", "--expect", str(exp))
    assert res.exit_code == 2


def test_geometry_failure_exit_1(runner, tmp_path):
    # r = 0.5 on a 2x2 grid runs through the grid nodes (0.5, 0) and (0, 0.5)
    sc = tmp_path / "touch.txt"
    sc.write_text("geometry = fan\nradius = 0.5\nmeshes = 2x2\n")
    res = runner.invoke(main, ["run", "--scenario", str(sc)])
    assert res.exit_code == 1
    assert "TangencyError" in res.output


def test_dump_points(runner, tmp_path):
    out = tmp_path / "pts.csv"
    res = invoke(runner, "dump-points", "--scenario", "hole", "--mesh", "3x3", "--scheme", "both", "--out", str(out))
    assert res.exit_code == 0
    text = out.read_text()
    assert text.count("element,scheme,kind,s,t,w_total") == 1
    rows = [r.split(",") for r in text.splitlines()[1:]]
    assert {r[1] for r in rows} == {"baseline", "improved"}
    assert {r[2] for r in rows} <= {"rect", "tri", "ctri", "cquad"}
    w = {s: sum(float(r[5]) for r in rows if r[1] == s) for s in ("baseline", "improved")}
    r = load_scenario("hole").radius
    for v in w.values():
        assert v == pytest.approx(1 - np.pi * r * r, rel=1e-4)


def test_dump_points_stdout(runner):
    res = invoke(runner, "dump-points", "--scenario", "fan", "--mesh", "3x3", "--scheme", "improved")
    assert res.exit_code == 0
    scheme, pts = read_point_dump(io.StringIO(res.output))
    assert scheme == "improved" and len(pts) == 81


def test_report_deterministic(tmp_path):
    sc = load_scenario("fan")
    from trimiga.bench import with_overrides

    sc = with_overrides(sc, [(3, 3), (10, 10)])
    a = format_report(run_scenario(sc, tmp_path / "a"))
    b = format_report(run_scenario(sc, tmp_path / "b"))
    assert a == b
    assert (tmp_path / "a" / "report.txt").read_bytes() == (tmp_path / "b" / "report.txt").read_bytes()
    assert (tmp_path / "a" / "points_10x10_baseline.csv").read_bytes() == (
        tmp_path / "b" / "points_10x10_baseline.csv"
    ).read_bytes()


def test_report_roundtrip():
    from trimiga.bench import with_overrides

    rep = run_scenario(with_overrides(load_scenario("hole"), [(3, 3)]))
    back = parse_report(format_report(rep))
    assert format_report(back) == format_report(rep)
    row = back.row("3x3", "improved")
    assert (row.te, row.cells, row.points) == (8, 12, 108)
    assert (row.a, row.b, row.c) == (4, 4, 0)
    assert dict(back.ratios())["3x3"] == pytest.approx(108 / 156)


def test_verify_count_law():
    from trimiga.bench import with_overrides

    rep = run_scenario(with_overrides(load_scenario("fan"), [(3, 3)]))
    rep.rows[0].points += 1
    ok, msgs = verify(rep, parse_expectations(""))
    assert not ok and any("count law" in m for m in msgs)


def test_check_with_rtol():
    from trimiga.bench import with_overrides

    rep = run_scenario(with_overrides(load_scenario("fan"), [(3, 3)]))
    exp = parse_expectations("[checks]\nimproved.l2@3x3 == baseline.l2@3x3 rtol=0.05\nimproved.l2@3x3 < 0.001\n")
    ok, msgs = verify(rep, exp)
    assert msgs[0].startswith("ok") and msgs[1].startswith("FAIL") and not ok


def test_parse_mesh():
    assert parse_mesh("10x10") == (10, 10)
    assert parse_mesh(" 4X6 ") == (4, 6)
    assert parse_mesh("7") == (7, 7)
    with pytest.raises(ScenarioError):
        parse_mesh("x3")


def test_custom_curve_scenario(runner, tmp_path):
    # a straight cut from (0.9, 0) to (0, 0.7), kept side towards the origin
    sc = tmp_path / "cut.txt"
    sc.write_text(
        "geometry = custom\nmeshes = 4x4\nscheme = improved\nproblem = poly:0.5,1,-1,0.25,0.5,-0.75\n"
        "[curve]\ndegree = 1\nknots = 0 0 1 1\npoints = 0.9 0; 0 0.7\n"
    )
    out = tmp_path / "o"
    res = invoke(runner, "run", "--scenario", str(sc), "--out", str(out))
    assert res.exit_code == 0, res.output
    row = parse_report((out / "report.txt").read_text()).row("4x4", "improved")
    assert row.area == pytest.approx(0.5 * 0.9 * 0.7, abs=1e-14)
    assert row.l2 <= 1e-10


@pytest.mark.parametrize(
    "text",
    ["geometry = fan\nwidth = 3\n", "geometry = fan\nmeshes = 0x3\n", "[surface]\n", "geometry = blob\n",
     "geometry = custom\n", "geometry = fan\nscheme = fancy\n", "geometry = fan\nq = three\n"],
)
def test_bad_scenarios(text):
    with pytest.raises(ScenarioError):
        parse_scenario(text).validate()


def test_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "trimiga.cli", "run", "--scenario", "hole", "--mesh", "3x3", "--expect", "hole"],
        capture_output=True, text=True,
    )
    # the built-in expectations also list the finer meshes, which this run skips
    assert res.returncode == 1
    assert "ok   counts 3x3 improved Te/cells/points = (8, 12, 108)" in res.stdout
    assert "ok   counts 3x3 baseline Te/cells/points = (8, 20, 156)" in res.stdout
