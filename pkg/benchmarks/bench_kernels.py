"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--grid 400x128] [--repeat 5]

Each kernel is called on operators from a real linear-media problem; the
first compiled call is excluded (JIT warm-up). An end-to-end solve is timed
in two subprocesses, one per ``HELMSTACK_NUMBA`` setting.
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from helmstack import _kernels
from helmstack.core import select_omega
from helmstack.discretize import apply_shift, assemble_saddle, shifted_saddle
from helmstack.experiments import linear_with_abc
from helmstack.multigrid import setup_vanka
from helmstack.precond import ZOperator


def best_of(fn, repeat):
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return min(ts)


def kernel_cases(cells):
    media = linear_with_abc(cells)
    s = assemble_saddle(media, select_omega(media))
    K = s.full()
    H = apply_shift(s.blocks[0], s.face_rho[0], 0.1, s.omega)
    inv = np.ascontiguousarray(1.0 / H.diagonal())
    rng = np.random.default_rng(0)
    xK = rng.standard_normal(K.shape[0]) + 0j
    xH = rng.standard_normal(H.shape[0]) + 0j
    bH = np.ones(H.shape[0], complex)
    Ks = shifted_saddle(s, 0.1)
    vd = setup_vanka(Ks, s.grid)
    r = rng.standard_normal(Ks.shape[0]) + 0j
    small = linear_with_abc((16, 16))
    Z = ZOperator(small, select_omega(small)).dense()

    cases = {
        "csr_matvec": lambda nb: _kernels.csr_matvec(K.indptr, K.indices, K.data, xK, nb),
        "jacobi_sweep": lambda nb: _kernels.jacobi_sweep(H.indptr, H.indices, H.data, inv,
                                                         xH.copy(), bH, 0.8, nb),
        "vanka_update": lambda nb: _kernels.vanka_update(np.zeros_like(r), r, vd.dofs,
                                                         vd.inv_blocks, vd.colors[0], 0.65, nb),
        "hessenberg_256": lambda nb: _kernels.hessenberg(Z, nb),
        "qr_eigvals_256": lambda nb: _kernels.qr_eigvals(_kernels.hessenberg(Z, nb), 20000, nb),
    }
    return cases


SOLVE = """
import json, time
from helmstack.experiments import RunConfig, run
t0 = time.perf_counter()
res = run(RunConfig(media="linear", grid=%r, block_solve="multigrid", alpha=0.1,
                    krylov={"restart": 5}))
print(json.dumps({"its": res.report.iterations, "time": time.perf_counter() - t0}))
"""


def end_to_end(cells):
    out = {}
    for flag in ("1", "0"):
        env = dict(os.environ, HELMSTACK_NUMBA=flag)
        p = subprocess.run([sys.executable, "-c", SOLVE % list(cells)], env=env,
                           capture_output=True, text=True, check=True)
        out[flag] = json.loads(p.stdout.strip().splitlines()[-1])
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", default="400x128")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-solve", action="store_true")
    args = ap.parse_args(argv)
    cells = tuple(int(c) for c in args.grid.split("x"))
    if not _kernels.HAVE_NUMBA:
        print("numba is not installed; only the numpy path is available")
        return 1
    print(f"grid {args.grid}, best of {args.repeat}")
    print(f"{'kernel':16s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for name, fn in kernel_cases(cells).items():
        fn(True)  # compile
        t_nb = best_of(lambda: fn(True), args.repeat)
        t_np = best_of(lambda: fn(False), max(1, args.repeat // 2) if "qr" in name else args.repeat)
        print(f"{name:16s} {1e3 * t_nb:11.3f} {1e3 * t_np:11.3f} {t_np / t_nb:8.1f}x")
    if not args.skip_solve:
        e = end_to_end(cells)
        print(f"end-to-end 2-level GMRES(5) solve: numba {e['1']['time']:.2f}s "
              f"({e['1']['its']} its), numpy {e['0']['time']:.2f}s ({e['0']['its']} its)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
