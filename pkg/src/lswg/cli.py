"""Command line entry point ``wg-cauchy``.

    wg-cauchy run --config FILE [--case --k --epsilon --bx --by --family --levels --solver --out]
    wg-cauchy mesh --family F --level i --out FILE
    wg-cauchy sample --config FILE --resolution R [--out FILE]

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .mesh import FAMILIES, grid_family, save_mesh
from .postproc import sample_field, write_field_csv
from .study import ConfigError, SolverFailure, parse_config, run_study, solve_level

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3

_STUDY_FLAGS = ("case", "k", "epsilon", "bx", "by", "family", "levels", "solver", "out", "poly")


def _add_study_flags(p):
    p.add_argument("--config")
    for key in _STUDY_FLAGS:
        p.add_argument(f"--{key}")


def _config(args):
    overrides = {key: getattr(args, key) for key in _STUDY_FLAGS}
    return parse_config(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wg-cauchy",
                                     description="Least-squares weak Galerkin solver for Cauchy problems")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_study_flags(sub.add_parser("run", help="run a convergence study"))
    m = sub.add_parser("mesh", help="export a grid in POLYMESH format")
    m.add_argument("--family", required=True, choices=sorted(FAMILIES))
    m.add_argument("--level", required=True, type=int)
    m.add_argument("--out", required=True)
    s = sub.add_parser("sample", help="sample u_0 on the finest configured level")
    _add_study_flags(s)
    s.add_argument("--resolution", type=int, default=101)
    s.add_argument("--field", help="CSV path (default: <out>/field.csv)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")

    if args.command == "mesh":
        try:
            mesh = grid_family(args.family, args.level)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        save_mesh(mesh, args.out)
        print(f"wrote {mesh.n_cells} cells, {mesh.n_edges} edges to {args.out}")
        return EXIT_OK

    try:
        cfg = _config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "run":
        report = run_study(cfg)
        print(report.table())
        if report.status != "ok":
            print(f"solver failure: {report.message}", file=sys.stderr)
        return report.exit_code

    if args.resolution < 2:
        print("config error: resolution must be at least 2", file=sys.stderr)
        return EXIT_CONFIG
    try:
        res = solve_level(cfg, cfg.levels[-1])
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    pts, vals, flagged = sample_field(res.space, res.x, args.resolution)
    path = args.field or os.path.join(cfg.out, "field.csv")
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    write_field_csv(pts, vals, path)
    print(f"wrote {len(vals)} samples to {path} ({int(flagged.sum())} clamped)")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
