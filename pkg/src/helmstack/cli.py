"""``helmstack`` command line: solve, bench, convert, analyze.

Exit codes: 0 success, 1 numerical failure, 2 bad input or configuration,
3 solve finished without reaching the tolerance (artifacts still written).
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from typing import List, Optional

import numpy as np

from . import experiments as ex
from .core import (MediaModel, ModelError, elastic_from_acoustic, extend_bottom,
                   lame_from_velocities, poisson_ratio, slice_media)
from .io import (FormatError, read_ehgrid, write_csv_rows, write_ehgrid, write_field,
                 write_ppm)
from .krylov import write_residuals_csv
from .sparse import EigenConvergenceError, FactorizationError

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2, 3


def _dims(text: str) -> List[int]:
    try:
        dims = [int(t) for t in text.lower().split("x")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 200x64, got {text!r}")
    if len(dims) not in (2, 3) or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"grid must have 2 or 3 positive sizes, got {text!r}")
    return dims


def _sides(text: str):
    if text == "all":
        return "all"
    out = []
    for tok in text.split(","):
        tok = tok.strip().lower()
        if len(tok) != 2 or tok[0] not in "xyz" or tok[1] not in "01":
            raise argparse.ArgumentTypeError(f"side must look like x0, z1; got {tok!r}")
        out.append(["xyz".index(tok[0]), int(tok[1])])
    return out


def _add_problem_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="RunConfig JSON file; explicit flags override it")
    p.add_argument("--media", help="builtin name (homogeneous, linear) or EHGRID path")
    p.add_argument("--grid", type=_dims, help="cell counts, e.g. 200x64")
    p.add_argument("--lambda-factor", type=float)
    p.add_argument("--gs-target", type=float, help="grid points per shear wavelength")
    p.add_argument("--abc-width", type=int, help="sponge width in cells (default: 20, clipped)")
    p.add_argument("--abc-gamma0", type=float)
    p.add_argument("--abc-gamma-max", type=float)
    p.add_argument("--abc-sides", type=_sides, help="'all' or a list like x0,x1,z1")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="helmstack", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve the point-source problem and write artifacts")
    _add_problem_args(s)
    s.add_argument("--preconditioner", choices=["block-acoustic", "monolithic", "fp", "bfbt",
                                                "none"])
    s.add_argument("--block-solve", choices=["direct", "multigrid"])
    s.add_argument("--levels", type=int)
    s.add_argument("--alpha", type=float, help="complex shift (artificial attenuation)")
    s.add_argument("--cycle", choices=["V", "W"])
    s.add_argument("--nu1", type=int)
    s.add_argument("--nu2", type=int)
    s.add_argument("--method", choices=["gmres", "fgmres"])
    s.add_argument("--restart", type=int, help="0 = no restart")
    s.add_argument("--tol", type=float)
    s.add_argument("--max-total-iters", type=int)
    s.add_argument("-o", "--output-dir")
    s.add_argument("--log-ppm", action="store_true", help="log-scaled heatmaps")

    b = sub.add_parser("bench", help="run a benchmark suite and print a CSV table")
    b.add_argument("suite", choices=sorted(ex.SUITES))
    b.add_argument("--max-cells", type=float, default=2e5)
    b.add_argument("--out", help="CSV path (default: stdout)")

    c = sub.add_parser("convert", help="validate / convert an EHGRID media file")
    c.add_argument("input")
    c.add_argument("output")
    c.add_argument("--elastic-from-vp", action="store_true",
                   help="derive density and shear velocity from the P velocity")
    c.add_argument("--extend-bottom", type=int, default=0, metavar="ROWS",
                   help="replicate the deepest row ROWS times (16 for shallow models)")
    c.add_argument("--report", help="write the summary JSON here as well")

    a = sub.add_parser("analyze", help="spectral diagnostics of Z")
    a.add_argument("what", choices=["spectrum", "sweep"])
    _add_problem_args(a)
    a.add_argument("--slice", type=_dims, help="top-left sub-model, e.g. 50x50")
    a.add_argument("--shift", type=float, default=0.0)
    a.add_argument("--shifts", default="0,0.01,0.05,0.1,0.2,0.5")
    a.add_argument("--out", help="CSV path (default: stdout)")
    return ap


def config_from_args(args) -> ex.RunConfig:
    base = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ModelError(f"cannot read config {args.config}: {exc}") from None
    cfg = ex.RunConfig.from_dict(base).to_dict()
    direct = {"media": "media", "grid": "grid", "lambda_factor": "lambda_factor",
              "gs_target": "gs_target", "seed": "seed", "preconditioner": "preconditioner",
              "block_solve": "block_solve", "levels": "levels", "alpha": "alpha",
              "cycle": "cycle", "nu1": "nu1", "nu2": "nu2", "output_dir": "output_dir"}
    for arg, key in direct.items():
        v = getattr(args, arg, None)
        if v is not None:
            cfg[key] = v
    for arg, key in (("method", "method"), ("restart", "restart"), ("tol", "tol"),
                     ("max_total_iters", "max_total_iters")):
        v = getattr(args, arg, None)
        if v is not None:
            cfg["krylov"][key] = v
    for arg, key in (("abc_width", "layer_width"), ("abc_gamma0", "gamma0"),
                     ("abc_gamma_max", "gamma_max")):
        v = getattr(args, arg, None)
        if v is not None:
            cfg["abc"][key] = v
    if getattr(args, "abc_sides", None) is not None:
        cfg["abc"]["sides"] = None if args.abc_sides == "all" else args.abc_sides
    if cfg["media"] not in ex.BUILTINS and args.grid is None and not base.get("grid"):
        cfg["grid"] = None
    return ex.RunConfig.from_dict(cfg)


def _cell_average_magnitude(saddle, u) -> np.ndarray:
    g = saddle.grid
    total = np.zeros(g.cells)
    for a, comp in enumerate(saddle.components(u)):
        f = np.abs(comp).reshape(g.face_shape(a), order="F")
        lo = [slice(None)] * g.dim
        hi = [slice(None)] * g.dim
        lo[a] = slice(0, -1)
        hi[a] = slice(1, None)
        total += (0.5 * (f[tuple(lo)] + f[tuple(hi)])) ** 2
    return np.sqrt(total)


def _image_plane(arr: np.ndarray) -> np.ndarray:
    """2D fields pass through; 3D fields are cut at the middle of axis 1."""
    return arr if arr.ndim == 2 else arr[:, arr.shape[1] // 2, :]


def write_solve_artifacts(res: ex.RunResult, outdir: str, log_ppm: bool = False):
    s = res.saddle
    g = s.grid
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "config.echo.json"), "w") as fh:
        fh.write(res.config.to_json() + "\n")
    with open(os.path.join(outdir, "report.json"), "w") as fh:
        json.dump(res.report_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_residuals_csv(os.path.join(outdir, "residuals.csv"), res.report.residual_history)
    u, p = s.split(res.x)
    for a, comp in enumerate(s.components(u)):
        write_field(os.path.join(outdir, f"u{a + 1}.bin"), comp, g.face_shape(a))
        write_ppm(os.path.join(outdir, f"|u{a + 1}|.ppm"),
                  _image_plane(np.abs(comp).reshape(g.face_shape(a), order="F")), log_ppm)
    write_field(os.path.join(outdir, "p.bin"), p, g.cells)
    write_ppm(os.path.join(outdir, "|u|.ppm"), _image_plane(_cell_average_magnitude(s, u)),
              log_ppm)
    write_ppm(os.path.join(outdir, "|p|.ppm"),
              _image_plane(np.abs(p).reshape(g.cells, order="F")), log_ppm)


def cmd_solve(args) -> int:
    cfg = config_from_args(args)
    res = ex.run(cfg)          # nothing is written before the solve succeeds
    write_solve_artifacts(res, cfg.output_dir, args.log_ppm)
    r = res.report
    print(f"{'converged' if r.converged else 'NOT converged'}: {r.iterations} iterations, "
          f"relres {r.true_relres:.3e}, {r.wall_time:.2f}s -> {cfg.output_dir}")
    return EXIT_OK if r.converged else EXIT_NOT_CONVERGED


def _emit_csv(header, rows, out: Optional[str]):
    if out:
        write_csv_rows(out, header, rows)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([r.get(k, "") for k in header])


def cmd_bench(args) -> int:
    header, rows = ex.SUITES[args.suite](args.max_cells)
    _emit_csv(header, rows, args.out)
    failed = [r for r in rows if r.get("pass") == "fail"]
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_convert(args) -> int:
    grid, rho, vp, vs = read_ehgrid(args.input)
    if args.elastic_from_vp:
        m = elastic_from_acoustic(vp, grid)
    else:
        lam, mu = lame_from_velocities(rho, vp, vs)
        m = MediaModel(grid, rho, lam, mu, 0.0)
    if args.extend_bottom:
        m = extend_bottom(m, args.extend_bottom)
    vp_o, vs_o = m.velocities
    write_ehgrid(args.output, m.grid, m.rho, vp_o, vs_o)
    sigma = poisson_ratio(m.lam, m.mu)
    summary = {"cells": list(m.grid.cells), "spacing": list(m.grid.spacing),
               "rho": [float(m.rho.min()), float(m.rho.max())],
               "vp": [float(vp_o.min()), float(vp_o.max())],
               "vs": [float(vs_o.min()), float(vs_o.max())],
               "lambda": [float(m.lam.min()), float(m.lam.max())],
               "mu": [float(m.mu.min()), float(m.mu.max())],
               "poisson_ratio": [float(np.min(sigma)), float(np.max(sigma))]}
    text = json.dumps(summary, indent=2)
    print(text)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text + "\n")
    return EXIT_OK


def cmd_analyze(args) -> int:
    from .analysis import rho_z_sweep, spectrum_of_Z
    from .core import select_omega
    cfg = config_from_args(args)
    media = ex.load_media(cfg)
    if args.slice:
        media = slice_media(media, args.slice)
    omega = select_omega(media, cfg.gs_target)
    if args.what == "spectrum":
        rep = spectrum_of_Z(media, omega, args.shift, gs=cfg.gs_target)
        rows = [{"re": repr(float(z.real)), "im": repr(float(z.imag))} for z in rep.eigenvalues]
        _emit_csv(["re", "im"], rows, args.out)
        print(f"spectral radius {rep.spectral_radius:.6g} over {len(rows)} eigenvalues",
              file=sys.stderr)
    else:
        shifts = [float(t) for t in args.shifts.split(",") if t.strip()]
        rows = [{"alpha": a, "rho": repr(float(r.rho))}
                for a, r in rho_z_sweep(media, omega, shifts)]
        _emit_csv(["alpha", "rho"], rows, args.out)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "bench": cmd_bench, "convert": cmd_convert,
            "analyze": cmd_analyze}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ModelError, ValueError) as exc:   # FormatError is a ModelError
        print(f"helmstack: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FactorizationError, EigenConvergenceError, MemoryError) as exc:
        print(f"helmstack: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
