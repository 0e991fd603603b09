"""Command-line harness: reproducible CSV experiments and solves on user meshes.

Every run writes its outputs plus a JSON manifest holding the fully resolved
configuration; `--from-manifest` replays a manifest and reproduces the CSV
outputs byte for byte (all computations are deterministic, no RNG anywhere).
Exit codes: 0 success, 2 validation error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time

import numpy as np
import scipy

from . import __version__
from .assembly import assemble, build_rhs, coefficient_field
from .mesh import (
    MODE_ZERO_MEAN,
    SurfaceMesh,
    gen_graded_square,
    gen_sphere,
    gen_torus,
    read_gmsh,
    write_off,
)
from .oracle import (
    convergence_rate,
    dense_decompose,
    dense_fractional,
    l2_error_on_mesh,
    sphere_series_solution,
    torus_fields,
)
from .pade import build_pade, eval_rm, pade_error_bound
from .scheme import build_time_grid, scalar_mu, scheme_error_bound
from .solver import SolverConfig, fractional_apply

log = logging.getLogger(__name__)


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok]


def _parse_ints(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok]


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(cell if isinstance(cell, str) else _fmt(cell) for cell in row) + "\n")


def _load_builtin(spec: str) -> SurfaceMesh:
    kind, _, rest = spec.partition(":")
    try:
        if kind == "sphere":
            return gen_sphere(int(rest))
        if kind == "torus":
            R, r, n1, n2 = rest.split(",")
            return gen_torus(float(R), float(r), int(n1), int(n2))
        if kind == "square":
            n0, p = rest.split(",")
            return gen_graded_square(int(n0), int(p))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad builtin spec {spec!r}: {exc}") from exc
    raise ValueError(f"unknown builtin {kind!r} (use sphere:L, torus:R,r,n1,n2, square:N0,p)")


def _source_field(name: str, mesh: SurfaceMesh, builtin: str | None):
    if name == "auto":
        kind = (builtin or "").partition(":")[0]
        name = {"sphere": "sign-x3", "torus": "torus-source", "square": "checkerboard"}.get(
            kind, "ones"
        )
        log.info("source field resolved to %r", name)
    if name == "ones":
        return name, lambda x: np.ones(len(x))
    if name == "sign-x3":
        return name, lambda x: np.sign(x[:, 2])
    if name == "checkerboard":
        def checker(x):
            s = np.sign(x[:, 0] * x[:, 1])
            s[s == 0] = 1.0
            return s
        return name, checker
    if name == "torus-source":
        if not (builtin or "").startswith("torus:"):
            raise ValueError("torus-source needs a torus builtin mesh")
        R, r = (float(v) for v in builtin.partition(":")[2].split(",")[:2])
        return name, lambda x: torus_fields(R, r, x)[1]
    if name.startswith("csv:"):
        path = name[4:]
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        vals = np.zeros(mesh.num_vertices)
        vals[data[:, 0].astype(int)] = data[:, 1]
        return name, vals
    raise ValueError(f"unknown source field {name!r}")


def _manifest(out_dir: str, subcommand: str, config: dict, outputs: list[str],
              mesh_stats: dict | None, t0: float) -> str:
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "fracsurf": __version__,
        },
        "mesh": mesh_stats,
        "timing_seconds": time.time() - t0,
        "outputs": outputs,
    }
    path = os.path.join(out_dir, f"manifest_{subcommand.replace('-', '_')}.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _mesh_stats(mesh: SurfaceMesh) -> dict:
    return {
        "vertices": mesh.num_vertices,
        "triangles": mesh.num_triangles,
        "boundary_vertices": int(mesh.boundary_vertices.sum()),
        "mode_hint": mesh.mode_hint,
    }


# ---------------------------------------------------------------- subcommands

def run_pade_table(config: dict, out_dir: str) -> list[str]:
    rows = []
    root_rows = []
    ts = np.round(np.arange(0, 101) * 0.01, 10)
    for m in config["m_list"]:
        for alpha in config["alpha_list"]:
            p = build_pade(m, alpha)
            actual = eval_rm(p, ts) - (1.0 + ts) ** (-alpha)
            bound = pade_error_bound(m, alpha, ts)
            for t, a, b in zip(ts, actual, bound):
                rows.append((m, alpha, t, a, b))
            for i in range(m):
                root_rows.append(
                    (m, alpha, i + 1, p.num_roots[i], p.den_roots[i], p.beta[i + 1])
                )
            root_rows.append((m, alpha, 0, math.nan, math.nan, p.beta[0]))
    path = os.path.join(out_dir, "pade_table.csv")
    _write_csv(path, ["m", "alpha", "t", "actual_err", "bound"], rows)
    roots_path = os.path.join(out_dir, "pade_roots.csv")
    _write_csv(
        roots_path, ["m", "alpha", "index", "num_root", "den_root", "beta"], root_rows
    )
    return [path, roots_path]


def run_scalar_error(config: dict, out_dir: str) -> list[str]:
    lh = config["lambda_hat"]
    lam_max = config["lambda_max"]
    grid = build_time_grid(lh, lam_max)
    config["L_plus_1"] = grid.num_steps
    lo = max(2.0, lh)
    lams = np.logspace(np.log10(lo), np.log10(lam_max), config["n_lambda"])
    paths = []
    for alpha in config["alpha_list"]:
        p = build_pade(config["m"], alpha)
        mu = scalar_mu(p, grid, lams)
        exact = lams ** (-alpha)
        abs_err = np.abs(mu - exact)
        rel_err = abs_err * lams**alpha
        bound = scheme_error_bound(config["m"], alpha, lh, lam_max)
        rows = [
            (lam, m_, e_, a_, r_, bound)
            for lam, m_, e_, a_, r_ in zip(lams, mu, exact, abs_err, rel_err)
        ]
        path = os.path.join(out_dir, f"scalar_error_a{alpha:g}.csv")
        _write_csv(path, ["lambda", "mu", "exact", "abs_err", "rel_err", "bound"], rows)
        paths.append(path)
    return paths


def run_sphere_convergence(config: dict, out_dir: str) -> list[str]:
    levels = config["levels"]
    if max(levels) > 5:
        raise ValueError("rate study limited to refinement level 5 (10242 dofs)")
    alphas = config["alpha_list"]
    m = config["m"]
    lh = config["lambda_hat"]
    n_terms = config["n_terms"]
    errors: dict[float, list[float]] = {a: [] for a in alphas}
    dofs: list[int] = []
    for level in levels:
        mesh = gen_sphere(level)
        op = assemble(mesh, coefficient_field(mesh), MODE_ZERO_MEAN)
        f_h = build_rhs(mesh, lambda x: np.sign(x[:, 2]), op, method="l2_project")
        cfg = SolverConfig(lambda_hat=lh, m=m, cg_rel_tol=config["cg_tol"])
        dofs.append(op.n)
        for alpha in alphas:
            result = fractional_apply(op, f_h, alpha, cfg)

            def u_ref(x, _a=alpha):
                z = x[:, 2] / np.linalg.norm(x, axis=1)  # lift to the sphere
                return sphere_series_solution(_a, z, n_terms=n_terms)

            errors[alpha].append(l2_error_on_mesh(mesh, op, result.solution, u_ref))
        log.info("level %d done (dof=%d)", level, op.n)
    rows = []
    print(f"{'alpha':>6} {'dof':>8} {'l2_error':>13} {'rate':>6}")
    for alpha in alphas:
        for k, level in enumerate(levels):
            rate = (
                convergence_rate(errors[alpha][k - 1], dofs[k - 1], errors[alpha][k], dofs[k])
                if k
                else float("nan")
            )
            rows.append((level, dofs[k], alpha, errors[alpha][k], rate))
            print(f"{alpha:6g} {dofs[k]:8d} {errors[alpha][k]:13.6e} "
                  + (f"{rate:6.2f}" if k else "     -"))
    path = os.path.join(out_dir, "sphere_convergence.csv")
    _write_csv(path, ["level", "dof", "alpha", "l2_error", "rate"], rows)
    return [path]


def run_solve(config: dict, out_dir: str) -> list[str]:
    if config.get("mesh_path"):
        mesh = read_gmsh(config["mesh_path"])
    else:
        mesh = _load_builtin(config["builtin"])
    mode = config.get("mode") or mesh.mode_hint
    b_coeff = 1.0 if mode == "positive-reaction" else 0.0
    op = assemble(mesh, coefficient_field(mesh, a=1.0, b=b_coeff), mode)
    name, f = _source_field(config["f"], mesh, config.get("builtin"))
    config["f_resolved"] = name
    f_h = build_rhs(mesh, f, op, method=config["rhs"])

    lam_max = config["lambda_max"]
    cfg = SolverConfig(
        lambda_hat=config["lambda_hat"],
        lambda_max_bound="auto" if lam_max == "auto" else float(lam_max),
        m=config["m"],
        cg_rel_tol=config["cg_tol"],
        cg_max_iter=config.get("cg_max_iter"),
        check_lambda_hat=False,  # user-supplied shift is authoritative here
    )
    off_path = os.path.join(out_dir, "mesh.off")
    write_off(mesh, off_path)  # geometry once; solution CSVs key vertices by index
    paths = [off_path]
    run_stats = []
    for alpha in config["alpha_list"]:
        t0 = time.time()
        result = fractional_apply(op, f_h, alpha, cfg)
        wall = time.time() - t0
        full = op.expand(result.solution)
        path = os.path.join(out_dir, f"solution_a{alpha:g}.csv")
        rows = [
            (k, v[0], v[1], v[2], u)
            for k, (v, u) in enumerate(zip(mesh.vertices, full))
        ]
        _write_csv(path, ["vertex", "x", "y", "z", "u"], rows)
        paths.append(path)
        run_stats.append(
            {
                "alpha": alpha,
                "L_plus_1": result.time_grid.num_steps,
                "total_solves": result.total_solves,
                "lambda_max_used": result.lambda_max_used,
                "a_priori_bound": result.a_priori_bound,
                "max_cg_residual": result.max_residual,
                "seconds": wall,
            }
        )
        print(
            f"alpha={alpha:g}: L+1={result.time_grid.num_steps} "
            f"solves={result.total_solves} bound={result.a_priori_bound:.3e} "
            f"time={wall:.2f}s"
        )
    config["runs"] = run_stats
    return paths


def run_compare_oracle(config: dict, out_dir: str) -> list[str]:
    mesh = _load_builtin(config["builtin"])
    mode = mesh.mode_hint
    b_coeff = 1.0 if mode == "positive-reaction" else 0.0
    op = assemble(mesh, coefficient_field(mesh, a=1.0, b=b_coeff), mode)
    if op.n > 2000:
        raise ValueError(f"compare-oracle limited to 2000 dofs, mesh has {op.n}")
    name, f = _source_field(config["f"], mesh, config["builtin"])
    config["f_resolved"] = name
    f_h = build_rhs(mesh, f, op, method=config["rhs"])
    fnorm = op.m_norm(f_h)
    decomp = dense_decompose(op)
    rows = []
    for alpha in config["alpha_list"]:
        exact = dense_fractional(op, alpha, f_h, decomp)
        for m in config["m_list"]:
            cfg = SolverConfig(
                lambda_hat=config["lambda_hat"], m=m, cg_rel_tol=config["cg_tol"]
            )
            result = fractional_apply(op, f_h, alpha, cfg)
            diff = result.solution - exact
            rel = op.m_norm(diff) / fnorm
            bound = scheme_error_bound(m, alpha, config["lambda_hat"], result.lambda_max_used)
            rows.append((alpha, m, rel, bound))
    path = os.path.join(out_dir, "compare_oracle.csv")
    _write_csv(path, ["alpha", "m", "rel_err", "bound"], rows)
    return [path]


_RUNNERS = {
    "pade-table": (run_pade_table, False),
    "scalar-error": (run_scalar_error, False),
    "sphere-convergence": (run_sphere_convergence, True),
    "solve": (run_solve, True),
    "compare-oracle": (run_compare_oracle, True),
}


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS keeps a top-level --out from being clobbered by the subparser default
    common.add_argument("--out", default=argparse.SUPPRESS,
                        help="output directory (default: out)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    top = argparse.ArgumentParser(
        prog="fracsurf",
        description="Inverse fractional powers of elliptic surface operators "
        "by the rational product scheme.",
    )
    top.add_argument("--from-manifest", help="replay a previous run's manifest")
    top.add_argument("--out", default="out", help="output directory (default: out)")
    top.add_argument("-v", "--verbose", action="store_true")
    sub = top.add_subparsers(dest="subcommand")

    p = sub.add_parser("pade-table", parents=[common],
                       help="approximation error vs bound on a t grid")
    p.add_argument("--m", default="1,2,3,4,6,8", help="comma list of orders")
    p.add_argument("--alpha", default="0.1,0.5,0.9", help="comma list of exponents")

    p = sub.add_parser("scalar-error", parents=[common],
                       help="scalar transfer-function error scan")
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--alpha", default="0.1,0.5,0.9")
    p.add_argument("--lambda-hat", type=float, default=1.0)
    p.add_argument("--lambda-max", type=float, default=2.0**50)
    p.add_argument("--n-lambda", type=int, default=200)

    p = sub.add_parser("sphere-convergence", parents=[common],
                       help="rate study on nested sphere meshes")
    p.add_argument("--levels", default="2,3,4,5")
    p.add_argument("--alpha", default="0.01,0.3,0.5,0.7,0.99")
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--lambda-hat", type=float, default=1.0)
    p.add_argument("--n-terms", type=int, default=4000)
    p.add_argument("--cg-tol", type=float, default=1e-12)

    p = sub.add_parser("solve", parents=[common], help="solve on a builtin or Gmsh mesh")
    p.add_argument("--mesh", dest="mesh_path", help="path to an ASCII .msh file")
    p.add_argument("--builtin", help="sphere:L | torus:R,r,n1,n2 | square:N0,p")
    p.add_argument("--alpha", default="0.5")
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--lambda-hat", type=float, default=1.0)
    p.add_argument("--lambda-max", default="auto")
    p.add_argument("--cg-tol", type=float, default=1e-12)
    p.add_argument("--cg-max-iter", type=int, default=None,
                   help="solver iteration budget (default 10*sqrt(n))")
    p.add_argument("--rhs", choices=["interpolate", "l2_project"], default="interpolate")
    p.add_argument("--f", default="auto",
                   help="auto|ones|sign-x3|checkerboard|torus-source|csv:PATH")

    p = sub.add_parser("compare-oracle", parents=[common],
                       help="solver vs dense spectral reference")
    p.add_argument("--builtin", default="sphere:2")
    p.add_argument("--alpha", default="0.01,0.5,0.99")
    p.add_argument("--m", default="1,2,3,4,5,6")
    p.add_argument("--lambda-hat", type=float, default=1.0)
    p.add_argument("--cg-tol", type=float, default=1e-12)
    p.add_argument("--rhs", choices=["interpolate", "l2_project"], default="l2_project")
    p.add_argument("--f", default="auto")
    return top


def _config_from_args(args) -> dict:
    sc = args.subcommand
    if sc == "pade-table":
        return {"m_list": _parse_ints(args.m), "alpha_list": _parse_floats(args.alpha)}
    if sc == "scalar-error":
        return {
            "m": args.m,
            "alpha_list": _parse_floats(args.alpha),
            "lambda_hat": args.lambda_hat,
            "lambda_max": args.lambda_max,
            "n_lambda": args.n_lambda,
        }
    if sc == "sphere-convergence":
        return {
            "levels": _parse_ints(args.levels),
            "alpha_list": _parse_floats(args.alpha),
            "m": args.m,
            "lambda_hat": args.lambda_hat,
            "n_terms": args.n_terms,
            "cg_tol": args.cg_tol,
        }
    if sc == "solve":
        if bool(args.mesh_path) == bool(args.builtin):
            raise ValueError("give exactly one of --mesh or --builtin")
        return {
            "mesh_path": args.mesh_path,
            "builtin": args.builtin,
            "alpha_list": _parse_floats(args.alpha),
            "m": args.m,
            "lambda_hat": args.lambda_hat,
            "lambda_max": args.lambda_max,
            "cg_tol": args.cg_tol,
            "cg_max_iter": args.cg_max_iter,
            "rhs": args.rhs,
            "f": args.f,
        }
    if sc == "compare-oracle":
        return {
            "builtin": args.builtin,
            "alpha_list": _parse_floats(args.alpha),
            "m_list": _parse_ints(args.m),
            "lambda_hat": args.lambda_hat,
            "cg_tol": args.cg_tol,
            "rhs": args.rhs,
            "f": args.f,
        }
    raise ValueError("no subcommand given (see --help)")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.from_manifest:
            with open(args.from_manifest) as fh:
                manifest = json.load(fh)
            subcommand = manifest["subcommand"]
            config = manifest["config"]
            config.pop("runs", None)  # regenerated on replay
            config.pop("L_plus_1", None)
        else:
            subcommand = args.subcommand
            config = _config_from_args(args)
        if subcommand not in _RUNNERS:
            raise ValueError(f"unknown subcommand {subcommand!r}")
        runner, _needs_mesh = _RUNNERS[subcommand]
        os.makedirs(args.out, exist_ok=True)
        t0 = time.time()
        outputs = runner(config, args.out)
        mesh_stats = None
        if config.get("builtin") or config.get("mesh_path"):
            mesh = (
                read_gmsh(config["mesh_path"])
                if config.get("mesh_path")
                else _load_builtin(config["builtin"])
            )
            mesh_stats = _mesh_stats(mesh)
        manifest_path = _manifest(args.out, subcommand, config, outputs, mesh_stats, t0)
        print(f"wrote {len(outputs)} output file(s) and {os.path.basename(manifest_path)}")
        return 0
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
