"""Command-line front end: ``mahjb {mesh,solve,study,domains}``.

Exit codes: 0 success, 2 Newton did not converge, 3 I/O or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import fileio
from .experiments import (
    FIELDS,
    DEFAULT_M,
    ExperimentSpec,
    ProblemData,
    best_per_level,
    experiment_names,
    get_experiments,
    records_to_csv,
    run_study,
    solve_on_mesh,
)
from .geometry import FAMILIES, DomainSpec, GeometryError, build_domain
from .mesh import MeshError, boundary_polygon, generate_mesh, refine
from .operator import BOUNDARY_VALUE_MODES, CLIP_MODES
from .solver import NewtonConfig

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_CONFIG = 0, 2, 3


class ConfigError(Exception):
    pass


# -- argument parsing ----------------------------------------------------------------


def parse_levels(text: str) -> tuple[int, ...]:
    """``"0..3"`` or ``"0,2,3"`` -> sorted unique levels."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = (int(v) for v in text.split(".."))
            levels = range(lo, hi + 1)
        else:
            levels = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad level list {text!r}") from exc
    levels = sorted(set(levels))
    if not levels or levels[0] < 0:
        raise argparse.ArgumentTypeError("levels must be non-negative and non-empty")
    return tuple(levels)


def parse_multipliers(text: str) -> tuple[float, ...]:
    try:
        ms = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad multiplier list {text!r}") from exc
    if not ms or any(m < 1 for m in ms):
        raise argparse.ArgumentTypeError("multipliers must be >= 1")
    return ms


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment; keys use flag spelling."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _add_domain(p):
    p.add_argument("--domain", help="domain family, e.g. lshape, heart, bent-square-convex")
    p.add_argument("--c", type=float, help="bent-square parameter (c > 1)")
    p.add_argument("--polygon", help="polygon file instead of --domain")


def _add_solver(p):
    p.add_argument("--ntheta", type=_positive_int)
    p.add_argument("--step-tol", type=_positive_float, default=5e-8)
    p.add_argument("--max-iter", type=_positive_int, default=50)
    p.add_argument("--clip", choices=CLIP_MODES)
    p.add_argument("--boundary-values", choices=BOUNDARY_VALUE_MODES)
    p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mahjb", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key = value file; command-line flags override it")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="generate (and refine) a mesh")
    _add_domain(p)
    p.add_argument("--h0", type=_positive_float)
    p.add_argument("--refine", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("solve", help="solve one problem on one mesh")
    p.add_argument("--experiment")
    _add_domain(p)
    p.add_argument("--mesh", help="mesh file to solve on")
    p.add_argument("--f", help=f"right-hand side field ({', '.join(FIELDS)})")
    p.add_argument("--g", help="boundary data field")
    p.add_argument("--h0", type=_positive_float)
    p.add_argument("--refine", type=int, default=0)
    p.add_argument("--m", type=_positive_float, default=2.0)
    _add_solver(p)
    p.add_argument("--out")

    p = sub.add_parser("study", help="convergence study over levels and multipliers")
    p.add_argument("--experiment", required=False)
    p.add_argument("--levels", type=parse_levels)
    p.add_argument("--m", type=parse_multipliers)
    p.add_argument("--h0", type=_positive_float)
    _add_solver(p)
    p.add_argument("--timing", action="store_true", help="fill the wall_time_s column")
    p.add_argument("--out", help="CSV path (default: standard output)")

    sub.add_parser("domains", help="list domain families, fields and experiments")
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.config:
        return args
    cfg = read_config(args.config)
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, value in cfg.items():
        action = known.get(key)
        if action is None or key in ("help",):
            raise ConfigError(f"unknown config key {key!r} for command {args.command!r}")
        if action.nargs == 0:  # store_true flag
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
            continue
        try:
            defaults[key] = action.type(value) if action.type else value
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from exc
        if action.choices and defaults[key] not in action.choices:
            raise ConfigError(f"{key!r} must be one of {list(action.choices)}")
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


# -- commands ---------------------------------------------------------------------------


def _domain_polygon(args, h):
    if args.polygon:
        return fileio.read_polygon(args.polygon)
    if not args.domain:
        raise ConfigError("give --domain or --polygon")
    return build_domain(DomainSpec(args.domain, args.c), h)


def cmd_mesh(args) -> int:
    if args.h0 is None:
        raise ConfigError("--h0 is required")
    if args.refine < 0:
        raise ConfigError("--refine must be >= 0")
    poly = _domain_polygon(args, args.h0)
    mesh = refine(generate_mesh(poly, args.h0), args.refine)
    if args.out:
        fileio.write_mesh(args.out, mesh)
    print(f"nodes {mesh.n_nodes}")
    print(f"triangles {mesh.n_triangles}")
    print(f"h {mesh.h:.6g}")
    print(f"area {mesh.triangle_areas().sum():.12g}")
    return EXIT_OK


def _single_experiment(name) -> ExperimentSpec:
    try:
        specs = get_experiments(name)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from exc
    if len(specs) != 1:
        raise ConfigError(f"{name!r} is a family; pick one of {', '.join(s.name for s in specs)}")
    return specs[0]


def _solver_options(args) -> dict:
    return dict(
        n_theta=args.ntheta,
        clip=args.clip,
        boundary_values=args.boundary_values,
        newton=NewtonConfig(args.step_tol, args.max_iter),
    )


def cmd_solve(args) -> int:
    if args.refine < 0:
        raise ConfigError("--refine must be >= 0")
    if args.experiment:
        spec = _single_experiment(args.experiment)
        data = spec.data
        if args.f or args.g:
            data = ProblemData(args.f or data.f, args.g or data.g)
        spec = spec.with_options(data=data, h0=args.h0)
    else:
        if not (args.f and args.g):
            raise ConfigError("custom problems need --f and --g (or use --experiment)")
        try:
            data = ProblemData(args.f, args.g)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from exc
        domain = DomainSpec(args.domain or "square", args.c)
        spec = ExperimentSpec("custom", domain, data, h0=args.h0 or 0.25)
    spec = spec.with_options(**_solver_options(args))

    if args.mesh:
        mesh = refine(fileio.read_mesh(args.mesh), args.refine)
        poly = fileio.read_polygon(args.polygon) if args.polygon else boundary_polygon(mesh)
    else:
        poly = _domain_polygon(args, spec.h0) if (args.polygon or args.domain) else spec.polygon()
        mesh = refine(generate_mesh(poly, spec.h0), args.refine)

    s = solve_on_mesh(spec, mesh, poly, args.m)
    if args.out:
        fileio.write_solution(args.out, mesh.nodes, s.u)
    rep = s.report
    print(f"dofs {mesh.n_nodes}")
    print(f"m {args.m:g}")
    print(f"newton_iterations {rep.iterations}")
    print(f"final_step {rep.final_step:.3e}")
    print(f"converged {'true' if rep.converged else 'false'}")
    err = s.error if spec.data.reference else None
    if err is not None:
        print(f"rel_linf_error {err:.5e}")
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def cmd_study(args) -> int:
    if not args.experiment:
        raise ConfigError("--experiment is required")
    try:
        specs = get_experiments(args.experiment)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from exc
    opts = _solver_options(args)
    opts.update(refinements=args.levels, multipliers=args.m, h0=args.h0)
    records = []
    for spec in specs:
        records += run_study(spec.with_options(**opts), workers=args.threads)
    text = records_to_csv(records, timings=args.timing)
    if args.out:
        Path(args.out).write_text(text)
        for lvl, r in sorted(best_per_level(records).items()):
            print(f"level {lvl}: best m {r.m:g}, error {r.rel_linf_error:.3e}")
    else:
        sys.stdout.write(text)
    return EXIT_OK if all(r.converged for r in records) else EXIT_NOT_CONVERGED


def cmd_domains(args) -> int:
    print("domains:     " + ", ".join(FAMILIES))
    print("fields:      " + ", ".join(FIELDS))
    print("experiments: " + ", ".join(experiment_names()))
    print("default m:   " + ",".join(str(m) for m in DEFAULT_M))
    return EXIT_OK


COMMANDS = {"mesh": cmd_mesh, "solve": cmd_solve, "study": cmd_study, "domains": cmd_domains}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # argparse usage errors
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, OSError, fileio.FormatError, GeometryError, MeshError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
