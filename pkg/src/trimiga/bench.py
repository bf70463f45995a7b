"""Scenario files, benchmark runs, reports and expectation checks.

Scenario format (``key = value`` lines, ``#`` comments)::

    geometry = fan            # fan | hole | custom
    radius = 0.946
    center = 0 0
    seams = 150.9 29.05 ...   # hole only: arc joints in degrees (clockwise order)
    meshes = 3x3 10x10 20x20
    degree = 2
    q = 3
    n = 7
    scheme = both             # baseline | improved | both
    problem = sine            # sine | none | poly:<c00>,<c10>,<c01>,...
    multipliers = coarse2
    bq = 4
    out = out/fan

    [curve]                   # custom geometry: one section per trim
    degree = 2
    knots = 0 0 0 1 1 1
    points = 1 0; 1 1; 0 1
    weights = 1 0.7071 1

Report format: ``key = value`` header, then a ``[rows]`` table with one
whitespace-separated row per mesh and scheme, then ``[ratios]`` when both
schemes ran. Wall times go to a separate timing file so reports stay
bit-identical between runs.
"""

from __future__ import annotations

import io
import math
import operator
import re
import time
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import TrimigaError
from .poisson import ManufacturedProblem, evaluate, polynomial_problem, sine_problem, solve_poisson
from .quad_gen import SCHEMES, count_points, generate, write_point_dump
from .spline_core import (
    KnotVector,
    NurbsCurve,
    QuadratureConfig,
    circle_arc,
    circle_through_angles,
    full_circle,
    make_uniform_surface,
)
from .trim_model import TrimmedSurface, build_elements, classify_points, type_counts

BUILTIN = ("fan", "hole")


class ScenarioError(ValueError):
    """Scenario, report or expectation text is malformed."""


# ---------------------------------------------------------------- scenario


@dataclass
class Scenario:
    name: str = "custom"
    geometry: str = "fan"
    radius: float = 0.946
    center: tuple = (0.0, 0.0)
    seams: tuple = ()
    curves: list = field(default_factory=list)
    meshes: list = field(default_factory=lambda: [(3, 3)])
    degree: int = 2
    q: int = 3
    n: int = 7
    scheme: str = "both"
    problem: str = "sine"
    multipliers: str = "coarse2"
    bq: int = 4
    max_depth: int = 6
    out: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.geometry not in ("fan", "hole", "custom"):
            raise ScenarioError(f"unknown geometry {self.geometry!r}")
        if self.geometry == "custom" and not self.curves:
            raise ScenarioError("custom geometry needs at least one [curve] section")
        if not self.meshes or any(a < 1 or b < 1 for a, b in self.meshes):
            raise ScenarioError("mesh sizes must be at least 1")
        if not 1 <= self.degree <= 4:
            raise ScenarioError("degree must be between 1 and 4")
        if self.scheme not in ("baseline", "improved", "both"):
            raise ScenarioError(f"unknown scheme {self.scheme!r}")
        if self.radius <= 0:
            raise ScenarioError("radius must be positive")
        try:
            QuadratureConfig(self.q, self.n)
            make_problem(self.problem)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc

    @property
    def schemes(self) -> tuple:
        return SCHEMES if self.scheme == "both" else (self.scheme,)

    @property
    def cfg(self) -> QuadratureConfig:
        return QuadratureConfig(self.q, self.n)

    def trims(self) -> list:
        if self.geometry == "fan":
            return [circle_arc(self.center, self.radius, 0.0, math.pi / 2)]
        if self.geometry == "hole":
            if self.seams:
                return [circle_through_angles(self.center, self.radius, np.radians(self.seams))]
            return [full_circle(self.center, self.radius, clockwise=True)]
        return list(self.curves)

    def domain(self, mesh) -> TrimmedSurface:
        return TrimmedSurface(make_uniform_surface(self.degree, *mesh), self.trims())


def parse_mesh(text: str) -> tuple:
    m = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", text)
    if m is None:
        if text.strip().isdigit():
            return int(text), int(text)
        raise ScenarioError(f"mesh must look like NxN, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def mesh_label(mesh) -> str:
    return f"{mesh[0]}x{mesh[1]}"


def make_problem(spec: str) -> ManufacturedProblem | None:
    if spec == "none":
        return None
    if spec == "sine":
        return sine_problem()
    if spec.startswith("poly:"):
        vals = [float(v) for v in spec[5:].split(",")]
        # coefficients listed by total degree: c00, c10, c01, c20, c11, c02, ...
        deg = 0
        while (deg + 1) * (deg + 2) // 2 < len(vals):
            deg += 1
        C = np.zeros((deg + 1, deg + 1))
        k = 0
        for d in range(deg + 1):
            for j in range(d + 1):
                if k < len(vals):
                    C[d - j, j] = vals[k]
                k += 1
        return polynomial_problem(C, spec)
    raise ValueError(f"unknown problem {spec!r}")


def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _parse_curve(kv: dict) -> NurbsCurve:
    try:
        deg = int(kv["degree"])
        knots = _floats(kv["knots"])
        pts = [_floats(row) for row in kv["points"].split(";") if row.strip()]
        w = _floats(kv["weights"]) if "weights" in kv else None
        return NurbsCurve(KnotVector(deg, knots), np.array(pts), None if w is None else np.array(w))
    except KeyError as exc:
        raise ScenarioError(f"[curve] section is missing {exc.args[0]!r}") from exc
    except ValueError as exc:
        raise ScenarioError(f"bad [curve] section: {exc}") from exc


def _kv_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def parse_scenario(text: str, name: str = "custom") -> Scenario:
    top: dict = {}
    curves = []
    section = None
    for lineno, line in _kv_lines(text):
        if line.startswith("["):
            section = line.strip("[] ").lower()
            if section != "curve":
                raise ScenarioError(f"line {lineno}: unknown section [{section}]")
            curves.append({})
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected key = value")
        key, val = (p.strip() for p in line.split("=", 1))
        (curves[-1] if section == "curve" else top)[key.lower()] = val
    kw = {"name": top.pop("name", name), "curves": [_parse_curve(c) for c in curves]}
    try:
        for key, val in top.items():
            if key in ("geometry", "scheme", "problem", "multipliers", "out"):
                kw[key] = val
            elif key == "radius":
                kw[key] = float(val)
            elif key in ("center",):
                kw[key] = tuple(_floats(val))
            elif key == "seams":
                kw[key] = tuple(_floats(val))
            elif key == "meshes":
                kw[key] = [parse_mesh(m) for m in val.split()]
            elif key in ("degree", "q", "n", "bq", "max_depth"):
                kw[key] = int(val)
            else:
                raise ScenarioError(f"unknown scenario key {key!r}")
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"bad value: {exc}") from exc
    return Scenario(**kw)


def builtin_text(name: str) -> str:
    return resources.files("trimiga").joinpath("scenarios", f"{name}.txt").read_text()


def load_scenario(ref: str) -> Scenario:
    """Scenario from a file path or a built-in name (``fan``, ``hole``)."""
    p = Path(ref)
    if p.is_file():
        return parse_scenario(p.read_text(), p.stem)
    if ref in BUILTIN:
        return parse_scenario(builtin_text(ref), ref)
    raise ScenarioError(f"no scenario file or built-in named {ref!r}")


# ---------------------------------------------------------------- running


@dataclass
class Row:
    mesh: str
    scheme: str
    te: int
    a: int
    b: int
    c: int
    cells: int
    points: int
    total_points: int
    area: float
    l2: float = float("nan")
    cond: float = float("nan")
    dropped: int = 0

    COLUMNS = ("mesh", "scheme", "te", "a", "b", "c", "cells", "points", "total_points", "area", "l2", "cond", "dropped")

    def law_ok(self, cfg: QuadratureConfig) -> bool:
        return count_points((self.a, self.b, self.c), cfg, self.scheme) == (self.cells, self.points)


@dataclass
class Report:
    header: dict
    rows: list
    timing: dict = field(default_factory=dict)

    def row(self, mesh: str, scheme: str) -> Row | None:
        for r in self.rows:
            if r.mesh == mesh and r.scheme == scheme:
                return r
        return None

    def ratios(self):
        out = []
        for mesh in dict.fromkeys(r.mesh for r in self.rows):
            b, i = self.row(mesh, "baseline"), self.row(mesh, "improved")
            if b is not None and i is not None:
                out.append((mesh, i.points / b.points if b.points else float("nan")))
        return out


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x)) if math.isfinite(x) else "nan"


def format_report(rep: Report) -> str:
    buf = io.StringIO()
    buf.write("# trimiga report\n")
    for k, v in rep.header.items():
        buf.write(f"{k} = {v}\n")
    buf.write("\n[rows]\n")
    buf.write(" ".join(Row.COLUMNS) + "\n")
    for r in rep.rows:
        buf.write(" ".join(_num(getattr(r, c)) if c not in ("mesh", "scheme") else getattr(r, c) for c in Row.COLUMNS) + "\n")
    ratios = rep.ratios()
    if ratios:
        buf.write("\n[ratios]\nmesh point_ratio\n")
        for mesh, ratio in ratios:
            buf.write(f"{mesh} {ratio:.6f}\n")
    return buf.getvalue()


def parse_report(text: str) -> Report:
    header, rows = {}, []
    section = None
    cols = None
    for lineno, line in _kv_lines(text):
        if line.startswith("["):
            section = line.strip("[] ")
            cols = None
            continue
        if section is None:
            if "=" not in line:
                raise ScenarioError(f"report line {lineno}: expected key = value")
            k, v = (p.strip() for p in line.split("=", 1))
            header[k] = v
        elif section == "rows":
            parts = line.split()
            if cols is None:
                cols = parts
                if tuple(cols) != Row.COLUMNS:
                    raise ScenarioError(f"report line {lineno}: unexpected columns {cols}")
                continue
            if len(parts) != len(cols):
                raise ScenarioError(f"report line {lineno}: expected {len(cols)} fields")
            vals = {}
            for c, p in zip(cols, parts):
                if c in ("mesh", "scheme"):
                    vals[c] = p
                elif c in ("area", "l2", "cond"):
                    vals[c] = float(p)
                else:
                    vals[c] = int(p)
            rows.append(Row(**vals))
    return Report(header, rows)


def run_scenario(sc: Scenario, out: Path | None = None, log=None) -> Report:
    """Classify, integrate and (optionally) solve every mesh/scheme pair.

    With ``out`` set, writes point dumps, 101x101 solution grids, the report
    and a timing file.
    """
    cfg = sc.cfg
    problem = make_problem(sc.problem)
    rows, timing = [], {}
    header = {
        "scenario": sc.name,
        "geometry": sc.geometry,
        "radius": repr(sc.radius) if sc.geometry != "custom" else "-",
        "center": " ".join(repr(float(c)) for c in sc.center) if sc.geometry != "custom" else "-",
        "degree": sc.degree,
        "q": sc.q,
        "n": sc.n,
        "m": cfg.m,
        "problem": sc.problem,
        "multipliers": sc.multipliers,
        "stiffness": "gradient form",
    }
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    for mesh in sc.meshes:
        label = mesh_label(mesh)
        ts = sc.domain(mesh)
        t0 = time.perf_counter()
        els = build_elements(ts, sc.max_depth)
        t_cls = time.perf_counter() - t0
        a, b, c = type_counts(els)
        for scheme in sc.schemes:
            t0 = time.perf_counter()
            cells, pts = generate(ts, els, scheme, cfg)
            trimmed = [cl for cl in cells if els[cl.element].kind.is_trimmed]
            tpts = sum(cl.npoints(cfg) for cl in trimmed)
            row = Row(label, scheme, a + b + c, a, b, c, len(trimmed), tpts, len(pts), float(pts.w.sum()))
            t_quad = time.perf_counter() - t0
            t_solve = 0.0
            sol = None
            if problem is not None:
                t0 = time.perf_counter()
                sol = solve_poisson(ts, pts, problem, sc.multipliers, sc.bq)
                t_solve = time.perf_counter() - t0
                row.l2, row.cond, row.dropped = sol.l2, sol.cond, len(sol.system.dropped)
            rows.append(row)
            timing[(label, scheme)] = (t_cls, t_quad, t_solve)
            if log is not None:
                log(f"{sc.name} {label} {scheme}: Te={row.te} cells={row.cells} points={row.points} l2={row.l2:.3e}")
            if out is not None:
                with open(out / f"points_{label}_{scheme}.csv", "w") as fh:
                    write_point_dump(fh, pts, scheme)
                if sol is not None:
                    write_solution_grid(out / f"solution_{label}_{scheme}.csv", ts, sol, problem)
    rep = Report(header, rows, timing)
    if out is not None:
        (out / "report.txt").write_text(format_report(rep))
        with open(out / "timing.txt", "w") as fh:
            fh.write("mesh scheme classify_s quadrature_s solve_s\n")
            for (label, scheme), (t1, t2, t3) in timing.items():
                fh.write(f"{label} {scheme} {t1:.4f} {t2:.4f} {t3:.4f}\n")
    return rep


def write_solution_grid(path, ts: TrimmedSurface, sol, problem, n: int = 101):
    """Uniform n x n samples of the discrete and exact solution; trimmed samples left blank."""
    s0, s1, t0, t1 = ts.box
    S, T = np.meshgrid(np.linspace(s0, s1, n), np.linspace(t0, t1, n), indexing="ij")
    s, t = S.ravel(), T.ravel()
    if ts.trims:
        kept, d = classify_points(ts, np.stack([s, t], -1))
        kept &= d > 1e-12
    else:
        kept = np.ones(len(s), dtype=bool)
    x = ts.surface(s, t)
    uh = evaluate(ts.surface, sol.coeffs, s, t)
    ue = problem.u(x[:, 0], x[:, 1])
    with open(path, "w") as fh:
        fh.write("s,t,x,y,u_h,u_exact\n")
        for k in range(len(s)):
            tail = f"{uh[k]:.17g},{ue[k]:.17g}" if kept[k] else ","
            fh.write(f"{s[k]:.17g},{t[k]:.17g},{x[k, 0]:.17g},{x[k, 1]:.17g},{tail}\n")


# ---------------------------------------------------------------- expectations

_OPS = {"<=": operator.le, "<": operator.lt, ">=": operator.ge, ">": operator.gt, "==": operator.eq}
_METRICS = ("te", "a", "b", "c", "cells", "points", "total_points", "area", "l2", "cond", "dropped")


@dataclass
class Expectations:
    counts: list  # (mesh, scheme, te, cells, points)
    checks: list  # (text, lhs, op, rhs, rtol)


def _operand(tok: str):
    m = re.fullmatch(r"(baseline|improved)\.(\w+)@(\d+x\d+)", tok)
    if m:
        if m.group(2) not in _METRICS:
            raise ScenarioError(f"unknown metric {m.group(2)!r}")
        return m.group(1), m.group(2), m.group(3)
    try:
        return float(tok)
    except ValueError:
        raise ScenarioError(f"bad operand {tok!r}; use scheme.metric@NxN or a number") from None


def parse_expectations(text: str) -> Expectations:
    counts, checks = [], []
    section = None
    for lineno, line in _kv_lines(text):
        if line.startswith("["):
            section = line.strip("[] ")
            if section not in ("counts", "checks"):
                raise ScenarioError(f"expectations line {lineno}: unknown section [{section}]")
            continue
        parts = line.split()
        if section == "counts":
            if parts[:2] == ["mesh", "scheme"]:
                continue
            if len(parts) != 5:
                raise ScenarioError(f"expectations line {lineno}: need mesh scheme te cells points")
            try:
                counts.append((mesh_label(parse_mesh(parts[0])), parts[1], *map(int, parts[2:])))
            except ValueError as exc:
                raise ScenarioError(f"expectations line {lineno}: {exc}") from exc
        elif section == "checks":
            rtol = 0.0
            if len(parts) == 4 and parts[3].startswith("rtol="):
                rtol = float(parts[3][5:])
                parts = parts[:3]
            if len(parts) != 3 or parts[1] not in _OPS:
                raise ScenarioError(f"expectations line {lineno}: need 'lhs op rhs [rtol=X]'")
            checks.append((line, _operand(parts[0]), parts[1], _operand(parts[2]), rtol))
        else:
            raise ScenarioError(f"expectations line {lineno}: outside a section")
    return Expectations(counts, checks)


def verify(rep: Report, exp: Expectations, cfg: QuadratureConfig | None = None):
    """Compare a report with expectations; returns ``(ok, messages)``."""
    msgs = []
    ok = True
    if cfg is None:
        cfg = QuadratureConfig(int(rep.header.get("q", 3)), int(rep.header.get("n", 7)))
    for r in rep.rows:
        if not r.law_ok(cfg):
            ok = False
            msgs.append(f"FAIL count law {r.mesh} {r.scheme}: (a,b,c)=({r.a},{r.b},{r.c}) "
                        f"predicts {count_points((r.a, r.b, r.c), cfg, r.scheme)}, got ({r.cells}, {r.points})")
    for mesh, scheme, te, cells, points in exp.counts:
        r = rep.row(mesh, scheme)
        if r is None:
            ok = False
            msgs.append(f"FAIL missing row {mesh} {scheme}")
            continue
        want, got = (te, cells, points), (r.te, r.cells, r.points)
        if want == got:
            msgs.append(f"ok   counts {mesh} {scheme} Te/cells/points = {got}")
        else:
            ok = False
            diff = ", ".join(f"{k} {w} -> {g}" for k, w, g in zip(("Te", "cells", "points"), want, got) if w != g)
            msgs.append(f"FAIL counts {mesh} {scheme}: expected {want}, got {got} ({diff})")
    for text, lhs, op, rhs, rtol in exp.checks:
        vals = []
        for side in (lhs, rhs):
            if isinstance(side, float):
                vals.append(side)
                continue
            scheme, metric, mesh = side
            r = rep.row(mesh, scheme)
            vals.append(None if r is None else float(getattr(r, metric)))
        if None in vals:
            ok = False
            msgs.append(f"FAIL {text}: missing row")
            continue
        a, b = vals
        slack = rtol * max(abs(a), abs(b))
        if op in ("<=", "<"):
            good = _OPS[op](a, b + slack)
        elif op in (">=", ">"):
            good = _OPS[op](a, b - slack)
        else:
            good = abs(a - b) <= slack if rtol else a == b
        ok &= bool(good)
        msgs.append(f"{'ok  ' if good else 'FAIL'} {text}: {a:.6g} {op} {b:.6g}")
    return ok, msgs


def with_overrides(sc: Scenario, meshes=None, scheme=None, degree=None, out=None) -> Scenario:
    kw = {}
    if meshes:
        kw["meshes"] = list(meshes)
    if scheme:
        kw["scheme"] = scheme
    if degree is not None:
        kw["degree"] = degree
    if out is not None:
        kw["out"] = out
    return replace(sc, **kw) if kw else sc


__all__ = [
    "Scenario",
    "ScenarioError",
    "Report",
    "Row",
    "Expectations",
    "parse_scenario",
    "load_scenario",
    "parse_mesh",
    "mesh_label",
    "make_problem",
    "run_scenario",
    "format_report",
    "parse_report",
    "parse_expectations",
    "verify",
    "with_overrides",
    "write_solution_grid",
    "TrimigaError",
]
