"""Command-line harness: ``trimiga run | verify | dump-points``.

Exit status: 0 success, 1 failure (geometry, solver or expectation), 2 bad input.
"""

import sys
from pathlib import Path

import click

from .bench import (
    ScenarioError,
    format_report,
    load_scenario,
    parse_expectations,
    parse_mesh,
    parse_report,
    run_scenario,
    verify,
    with_overrides,
)
from .errors import TrimigaError
from .quad_gen import generate, write_point_dump
from .trim_model import build_elements


class BadInput(click.ClickException):
    exit_code = 2


def _meshes(values):
    try:
        return [parse_mesh(v) for v in values]
    except ScenarioError as exc:
        raise BadInput(str(exc)) from exc


def _scenario(ref, mesh, scheme, degree, out=None):
    try:
        sc = load_scenario(ref)
        return with_overrides(sc, _meshes(mesh), scheme, degree, out)
    except ScenarioError as exc:
        raise BadInput(f"{ref}: {exc}") from exc


def _expectations(path):
    try:
        text = Path(path).read_text() if Path(path).is_file() else _builtin_expect(path)
        return parse_expectations(text)
    except (OSError, ScenarioError) as exc:
        raise BadInput(f"{path}: {exc}") from exc


def _builtin_expect(name):
    from importlib import resources

    f = resources.files("trimiga").joinpath("scenarios", f"expect_{name}.txt")
    if not f.is_file():
        raise ScenarioError("no such expectations file")
    return f.read_text()


def _report_verify(rep, exp_path):
    ok, msgs = verify(rep, _expectations(exp_path))
    for m in msgs:
        click.echo(m)
    click.echo("PASS" if ok else "FAIL")
    return ok


_common = [
    click.option("--scenario", "scenario", required=True, help="scenario file or built-in name (fan, hole)"),
    click.option("--mesh", "mesh", multiple=True, help="NxN element grid; repeat for several meshes"),
    click.option("--scheme", type=click.Choice(["baseline", "improved", "both"]), default=None),
    click.option("--degree", type=click.IntRange(1, 4), default=None, help="surface degree"),
]


def common(f):
    for opt in reversed(_common):
        f = opt(f)
    return f


@click.group()
def main():
    """Trimmed-NURBS Poisson benchmark: element counts, quadrature and errors."""


@main.command()
@common
@click.option("--out", type=click.Path(file_okay=False), default=None, help="output directory")
@click.option("--expect", type=str, default=None, help="expectations file (or built-in name) to verify against")
def run(scenario, mesh, scheme, degree, out, expect):
    """Run a scenario and write the report, point dumps and solution grids."""
    sc = _scenario(scenario, mesh, scheme, degree, out)
    out_dir = Path(sc.out) if sc.out else None
    exp = _expectations(expect) if expect else None
    try:
        rep = run_scenario(sc, out_dir, log=lambda m: click.echo(m, err=True))
    except (TrimigaError, ValueError) as exc:
        click.echo(f"error in scenario {sc.name!r}: {type(exc).__name__}: {exc}", err=True)
        sys.exit(1)
    click.echo(format_report(rep), nl=False)
    cfg_bad = [r for r in rep.rows if not r.law_ok(sc.cfg)]
    for r in cfg_bad:
        click.echo(f"count law violated: {r.mesh} {r.scheme}", err=True)
    ok = not cfg_bad
    if exp is not None:
        ok_exp, msgs = verify(rep, exp, sc.cfg)
        for m in msgs:
            click.echo(m)
        click.echo("PASS" if ok_exp else "FAIL")
        ok &= ok_exp
    sys.exit(0 if ok else 1)


@main.command(name="verify")
@click.option("--report", "report_path", required=True, type=click.Path(dir_okay=False))
@click.option("--expect", required=True, type=str, help="expectations file or built-in name")
def verify_cmd(report_path, expect):
    """Check a written report against an expectations file."""
    try:
        rep = parse_report(Path(report_path).read_text())
    except (OSError, ScenarioError) as exc:
        raise BadInput(f"{report_path}: {exc}") from exc
    sys.exit(0 if _report_verify(rep, expect) else 1)


@main.command(name="dump-points")
@common
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="output file (default stdout)")
def dump_points(scenario, mesh, scheme, degree, out):
    """Write quadrature points as element,scheme,kind,s,t,w_total rows."""
    sc = _scenario(scenario, mesh, scheme, degree)
    if len(sc.meshes) != 1:
        raise BadInput("dump-points needs exactly one mesh (use --mesh NxN)")
    fh = open(out, "w") if out else sys.stdout
    try:
        ts = sc.domain(sc.meshes[0])
        els = build_elements(ts, sc.max_depth)
        for k, sch in enumerate(sc.schemes):
            _, pts = generate(ts, els, sch, sc.cfg)
            write_point_dump(fh, pts, sch, header=k == 0)
    except (TrimigaError, ValueError) as exc:
        click.echo(f"error in scenario {sc.name!r}: {type(exc).__name__}: {exc}", err=True)
        sys.exit(1)
    finally:
        if out:
            fh.close()


if __name__ == "__main__":
    main()
