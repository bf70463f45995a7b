"""Compiled vs numpy kernel timings, plus an end-to-end 20x20 fan solve per backend.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import subprocess
import sys
import timeit

import numpy as np

from trimiga import _kernels_py

try:
    from trimiga import _kernels
except ImportError:
    _kernels = None


def _inputs(M=20000, p=2, n_el=20, seed=0):
    rng = np.random.default_rng(seed)
    knots = np.concatenate([np.zeros(p), np.linspace(0, 1, n_el + 1), np.ones(p)])
    u = rng.random(M)
    nloc = (p + 1) ** 2
    nd = 484
    idx = rng.integers(0, nd, size=(M, nloc)).astype(np.intp)
    vals = rng.random((M, nloc))
    grads = rng.standard_normal((M, nloc, 2))
    w = rng.random(M)
    f = rng.random(M)
    return knots, p, u, idx, vals, grads, w, f, nd


def micro(repeat):
    knots, p, u, idx, vals, grads, w, f, nd = _inputs()
    rows = []
    for name, mod in (("python", _kernels_py), ("cython", _kernels)):
        if mod is None:
            continue
        t_span = min(timeit.repeat(lambda: mod.find_spans(knots, p, u), number=1, repeat=repeat))
        t_basis = min(timeit.repeat(lambda: mod.basis_ders(knots, p, u, 1), number=1, repeat=repeat))

        def acc():
            K = np.zeros((nd, nd))
            F = np.zeros(nd)
            mod.accumulate_system(K, F, idx, vals, grads, w, f)

        t_acc = min(timeit.repeat(acc, number=1, repeat=repeat))
        rows.append((name, t_span, t_basis, t_acc))
    return rows


_E2E = """
import time, numpy as np
from trimiga.bench import load_scenario, with_overrides, run_scenario
sc = with_overrides(load_scenario('fan'), meshes=[(20, 20)], scheme='both')
run_scenario(sc)
t0 = time.perf_counter(); run_scenario(sc); print(time.perf_counter() - t0)
"""


def end_to_end():
    out = {}
    for name, env in (("python", {"TRIMIGA_PURE_PYTHON": "1"}), ("cython", {})):
        import os

        e = dict(os.environ)
        e.pop("TRIMIGA_PURE_PYTHON", None)
        e.update(env)
        res = subprocess.run([sys.executable, "-c", _E2E], env=e, capture_output=True, text=True, check=True)
        out[name] = float(res.stdout.strip().splitlines()[-1])
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rows = micro(args.repeat)
    print(f"{'backend':8s} {'find_spans':>12s} {'basis_ders':>12s} {'accumulate':>12s}   (20000 points, seconds)")
    for name, a, b, c in rows:
        print(f"{name:8s} {a:12.5f} {b:12.5f} {c:12.5f}")
    if len(rows) == 2:
        (_, a0, b0, c0), (_, a1, b1, c1) = rows
        print(f"{'speedup':8s} {a0 / a1:12.1f} {b0 / b1:12.1f} {c0 / c1:12.1f}")
    e2e = end_to_end()
    print("end-to-end fan 20x20, both schemes, classify + quadrature + solve:")
    for name, t in e2e.items():
        print(f"  {name:8s} {t:.3f} s")


if __name__ == "__main__":
    main()
