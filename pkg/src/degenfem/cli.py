"""``degenfem`` command line: mesh generation, single solves, convergence studies.

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .mesh import MeshError, generate_unit_square, load_mesh, refine_uniform, save_mesh
from .sparsela import NonConvergence, NonFiniteValue
from .stepper import EllipticityViolation
from .study import ConfigError, StudyConfig, cmd_solve, run_convergence

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

logger = logging.getLogger("degenfem")


def _rectangle(text: str):
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x0,y0,x1,y1, got {text!r}") from None
    if len(vals) != 4:
        raise argparse.ArgumentTypeError(f"expected four comma-separated numbers, got {text!r}")
    return vals


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="degenfem", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("mesh-gen", help="write a structured unit-square mesh")
    g.add_argument("--n", type=int, required=True, help="cells per side")
    g.add_argument("--conductor", type=_rectangle, default=None, help="x0,y0,x1,y1 (grid aligned)")
    g.add_argument("--refine", type=int, default=0, help="uniform refinements after generation")
    g.add_argument("--out", required=True)

    s = sub.add_parser("solve", help="solve the eddy-current problem once and dump fields")
    s.add_argument("--config", help="StudyConfig JSON file")
    s.add_argument("--mesh", help="mesh file to use instead of the generated n0 grid")
    s.add_argument("--problem", choices=["manufactured", "zero"], default="manufactured")
    s.add_argument("--dump-steps", action="store_true", help="also write every time level")
    s.add_argument("--n0", type=int)
    s.add_argument("--dt0", type=float)
    s.add_argument("--T", type=float)
    s.add_argument("--out", help="output directory (overrides config 'output')")

    c = sub.add_parser("convergence", help="run a refinement study and write the error table")
    c.add_argument("--config", help="StudyConfig JSON file")
    c.add_argument("--levels", type=int)
    c.add_argument("--dt-scaling", choices=["linear", "quadratic", "fixed"])
    c.add_argument("--n0", type=int)
    c.add_argument("--dt0", type=float)
    c.add_argument("--out", help="CSV path (overrides config 'output')")
    return p


def _config(args, **overrides) -> StudyConfig:
    if args.config:
        return StudyConfig.from_json(args.config, **overrides)
    return StudyConfig(**{k: v for k, v in overrides.items() if v is not None})


def _mesh_gen(args) -> int:
    mesh = generate_unit_square(args.n, args.conductor)
    for _ in range(args.refine):
        mesh = refine_uniform(mesh)
    save_mesh(mesh, args.out)
    print(f"wrote {args.out}: {mesh.n_nodes} nodes, {mesh.n_triangles} triangles")
    return EXIT_OK


def _solve(args) -> int:
    cfg = _config(args, n0=args.n0, dt0=args.dt0, T=args.T)
    out = args.out or cfg.output
    mesh = load_mesh(args.mesh) if args.mesh else None
    traj = cmd_solve(cfg, out, mesh=mesh, dump_steps=args.dump_steps, problem=args.problem)
    print(f"solved {traj.n_steps} steps; results in {out}")
    return EXIT_OK


def _convergence(args) -> int:
    cfg = _config(args, levels=args.levels, dt_scaling=args.dt_scaling, n0=args.n0, dt0=args.dt0)
    out = args.out or cfg.output
    report = run_convergence(cfg, out)
    for r in report.rows:
        print(f"level {r.level}: h={r.h:.4g} dt={r.dt:.4g} "
              f"H={r.err_H_pct:.4f}% E={r.err_E_pct:.4f}% max_sigma={r.err_max_sigma:.4g}")
    if report.slope_H is not None:
        print(f"slope_H={report.slope_H:.4f} slope_E={report.slope_E:.4f}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"mesh-gen": _mesh_gen, "solve": _solve, "convergence": _convergence}[args.command]
    try:
        return handler(args)
    except (NonConvergence, NonFiniteValue, EllipticityViolation) as exc:
        print(f"degenfem: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, MeshError, ValueError) as exc:
        if isinstance(exc, MeshError) and args.command != "mesh-gen":
            print(f"degenfem: bad mesh file: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"degenfem: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"degenfem: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
